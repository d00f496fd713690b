//! JSON-lines clip manifests.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lsptm_core::dataset::{ManifestEntry, TriLabel};

use crate::error::{Error, Result};
use crate::frames::VideoSource;

/// Entries plus the directory relative `frame_dir`s are resolved against.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn frame_dir(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.frame_dir)
    }

    pub fn source(&self, entry: &ManifestEntry) -> VideoSource {
        VideoSource {
            frame_dir: self.frame_dir(entry),
            frame_count: entry.frame_count,
        }
    }

    pub fn binary_labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.binary_label as usize).collect()
    }

    /// Explicit fold assignment, if every entry carries one.
    pub fn fixed_folds(&self) -> Option<Vec<usize>> {
        self.entries.iter().map(|e| e.fold).collect()
    }
}

/// Raw line shape, so an unknown label reports the offending word.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    frame_dir: String,
    frame_count: usize,
    tri_label: String,
    #[serde(default)]
    binary_label: Option<u8>,
    #[serde(default)]
    fold: Option<usize>,
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<ManifestEntry>> {
    let err = |line: usize, reason: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| err(line_no, e.to_string()))?;
        let tri = TriLabel::parse(&line.tri_label).map_err(|e| err(line_no, e.to_string()))?;
        let mut entry = ManifestEntry::new(line.id, line.frame_dir, line.frame_count, tri);
        entry.fold = line.fold;
        if let Some(b) = line.binary_label {
            entry.binary_label = b;
        }
        entry.validate().map_err(|e| err(line_no, e.to_string()))?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(err(0, "manifest has no entries".into()));
    }
    Ok(entries)
}

/// Parses and validates a manifest; every `frame_dir` must exist.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let entries = parse_manifest(&text, path)?;
    let manifest = Manifest {
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries,
    };
    for (n, e) in manifest.entries.iter().enumerate() {
        let dir = manifest.frame_dir(e);
        if !dir.is_dir() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line: n + 1,
                reason: format!("frame_dir {} does not exist", dir.display()),
            });
        }
    }
    Ok(manifest)
}

pub fn to_jsonl(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entries always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(to_jsonl(entries).as_bytes()).map_err(Error::io(path))
}
