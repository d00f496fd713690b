//! Writes synthetic datasets to disk as PPM frame directories plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use lsptm_core::dataset::{render_clip, ManifestEntry, SynthSpec};

use crate::error::{Error, Result};
use crate::frames::frame_path;
use crate::manifest::save_manifest;
use crate::ppm;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

fn write_clip(spec: &SynthSpec, out_dir: &Path, index: usize, entry: &ManifestEntry) -> Result<()> {
    let dir = out_dir.join(&entry.frame_dir);
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    for (f, frame) in render_clip(spec, index, entry.tri_label).iter().enumerate() {
        ppm::write(&frame_path(&dir, f), frame)?;
    }
    Ok(())
}

/// Renders every clip of `spec` under `out_dir` using up to `jobs` threads
/// and returns the manifest path. Output bytes do not depend on `jobs`.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path, jobs: usize) -> Result<PathBuf> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let entries: Vec<ManifestEntry> = spec
        .labels()
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let id = SynthSpec::clip_id(i);
            ManifestEntry::new(id.clone(), id, spec.frames, label)
        })
        .collect();

    let next = AtomicUsize::new(0);
    let worker = || -> Result<()> {
        loop {
            let i = next.fetch_add(1, Ordering::Relaxed);
            let Some(entry) = entries.get(i) else { return Ok(()) };
            write_clip(spec, out_dir, i, entry)?;
        }
    };
    thread::scope(|s| {
        let handles: Vec<_> = (0..jobs.clamp(1, entries.len())).map(|_| s.spawn(worker)).collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("generator thread panicked"))
    })?;

    let path = out_dir.join(MANIFEST_NAME);
    save_manifest(&path, &entries)?;
    Ok(path)
}
