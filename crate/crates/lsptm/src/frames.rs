//! Loading model-ready clips from directories of `frame_%06d.ppm` files.

use std::path::{Path, PathBuf};

use lsptm_core::clip::{assemble_clip, sample_indices, Augment, Clip, Image, NormStats, SamplingPolicy};

use crate::error::{Error, Result};
use crate::ppm;

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("frame_{index:06}.ppm"))
}

/// A directory of contiguous frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoSource {
    pub frame_dir: PathBuf,
    pub frame_count: usize,
}

impl VideoSource {
    /// Counts the contiguous frame files starting at index 0.
    pub fn scan(dir: impl Into<PathBuf>) -> Result<Self> {
        let frame_dir = dir.into();
        if !frame_dir.is_dir() {
            return Err(Error::Invalid(format!("{} is not a directory", frame_dir.display())));
        }
        let frame_count = (0..).take_while(|&i| frame_path(&frame_dir, i).is_file()).count();
        if frame_count == 0 {
            return Err(Error::Invalid(format!("{} has no frame_000000.ppm", frame_dir.display())));
        }
        Ok(Self { frame_dir, frame_count })
    }
}

/// sample → decode → resize → optional clip-wide flip → normalize →
/// channel-first stacking.
pub fn load_clip(
    src: &VideoSource,
    policy: &SamplingPolicy,
    augment: &Augment,
    target: (usize, usize),
    stats: &NormStats,
    label: usize,
    source_id: &str,
) -> Result<Clip> {
    let indices = sample_indices(src.frame_count, policy)?;
    let mut frames: Vec<Image<u8>> = Vec::with_capacity(indices.len());
    for &i in &indices {
        let path = frame_path(&src.frame_dir, i);
        let frame = ppm::read(&path)?;
        if let Some(first) = frames.first() {
            if (frame.height, frame.width) != (first.height, first.width) {
                return Err(Error::InconsistentResolution {
                    path,
                    expected: (first.height, first.width),
                    found: (frame.height, frame.width),
                });
            }
        }
        frames.push(frame);
    }
    let data = assemble_clip(&frames, target, augment.flips()?, stats)?;
    Ok(Clip {
        data,
        label,
        source_id: source_id.to_string(),
    })
}
