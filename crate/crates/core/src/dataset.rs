//! Dataset records and the deterministic synthetic laryngoscopy-like video
//! renderer that stands in for private clinical recordings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::Image;
use crate::error::{Error, Result};

/// Clinical three-way label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriLabel {
    Normal,
    Benign,
    Malignant,
}

impl TriLabel {
    pub const ALL: [TriLabel; 3] = [TriLabel::Normal, TriLabel::Benign, TriLabel::Malignant];

    pub fn as_str(self) -> &'static str {
        match self {
            TriLabel::Normal => "normal",
            TriLabel::Benign => "benign",
            TriLabel::Malignant => "malignant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(TriLabel::Normal),
            "benign" => Ok(TriLabel::Benign),
            "malignant" => Ok(TriLabel::Malignant),
            other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

/// Cancer vs non-cancer: malignant → 1, normal and benign → 0.
pub fn binarize(label: TriLabel) -> u8 {
    match label {
        TriLabel::Malignant => 1,
        TriLabel::Normal | TriLabel::Benign => 0,
    }
}

/// One video record. `frame_dir` is resolved relative to the manifest file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub frame_dir: String,
    pub frame_count: usize,
    pub tri_label: TriLabel,
    pub binary_label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

impl ManifestEntry {
    pub fn new(id: impl Into<String>, frame_dir: impl Into<String>, frame_count: usize, tri_label: TriLabel) -> Self {
        Self {
            id: id.into(),
            frame_dir: frame_dir.into(),
            frame_count,
            tri_label,
            binary_label: binarize(tri_label),
            fold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::InvalidArgument(format!("entry `{}` has no frames", self.id)));
        }
        if self.binary_label != binarize(self.tri_label) {
            return Err(Error::InvalidArgument(format!(
                "entry `{}`: binary label {} contradicts `{}`",
                self.id,
                self.binary_label,
                self.tri_label.as_str()
            )));
        }
        Ok(())
    }
}

/// Duplicate-id and per-entry validation over a whole manifest.
pub fn validate_entries(entries: &[ManifestEntry]) -> Result<()> {
    let mut seen = BTreeMap::new();
    for e in entries {
        e.validate()?;
        if seen.insert(e.id.as_str(), ()).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate id `{}`", e.id)));
        }
    }
    Ok(())
}

/// Parameters of the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_per_class: BTreeMap<TriLabel, usize>,
    pub frames: usize,
    pub resolution: (usize, usize),
    pub seed: u64,
    #[serde(default)]
    pub motif: MotifParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifParams {
    /// Blob radius range as a fraction of the shorter frame side.
    pub blob_radius: (f64, f64),
    /// Amplitude (in 8-bit levels) of the lesion texture.
    pub texture_roughness: f64,
    /// Amplitude (in pixels at the generated resolution) of periodic motion.
    pub motion_amplitude: f64,
}

impl Default for MotifParams {
    fn default() -> Self {
        Self {
            blob_radius: (0.18, 0.28),
            texture_roughness: 55.0,
            motion_amplitude: 3.0,
        }
    }
}

/// Background colour shared by every class; each frame's mean is pinned to it.
pub const BASE_COLOR: [f64; 3] = [130.0, 100.0, 95.0];

impl SynthSpec {
    pub fn total(&self) -> usize {
        self.n_per_class.values().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidArgument("synthetic spec has zero clips".into()));
        }
        if self.resolution.0 < 16 || self.resolution.1 < 16 {
            return Err(Error::InvalidArgument(format!(
                "resolution {:?} below 16×16",
                self.resolution
            )));
        }
        if self.frames == 0 {
            return Err(Error::InvalidArgument("synthetic clips need at least one frame".into()));
        }
        let (lo, hi) = self.motif.blob_radius;
        if !(0.0 < lo && lo <= hi && hi < 0.5) {
            return Err(Error::InvalidArgument(format!("blob radius range ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Clip labels in generation order: all normal, then benign, then malignant.
    pub fn labels(&self) -> Vec<TriLabel> {
        TriLabel::ALL
            .iter()
            .flat_map(|&l| core::iter::repeat_n(l, self.n_per_class.get(&l).copied().unwrap_or(0)))
            .collect()
    }

    pub fn clip_id(index: usize) -> String {
        format!("clip_{index:04}")
    }
}

/// Smooth shading shared by every class.
struct Background {
    freq: (f64, f64),
    phase: f64,
    amp: f64,
}

impl Background {
    fn value(&self, y: f64, x: f64, shift: (f64, f64), size: (f64, f64)) -> f64 {
        let u = (x + shift.1) / size.1;
        let v = (y + shift.0) / size.0;
        self.amp * libm::sin(2.0 * PI * (self.freq.0 * v + self.freq.1 * u) + self.phase)
    }
}

/// Renders every frame of clip `index` of a synthetic dataset.
///
/// Normal clips are lesion-free with global periodic drift; benign clips add
/// a smooth round blob in periodic motion; malignant clips add an irregular
/// blob with a coarse-grained texture that is redrawn every frame and a
/// boundary that jitters frame to frame. Every frame is then shifted so its
/// per-channel mean equals [`BASE_COLOR`], leaving colour statistics
/// uninformative about the class.
pub fn render_clip(spec: &SynthSpec, index: usize, label: TriLabel) -> Vec<Image<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ index as u64);
    let (h, w) = spec.resolution;
    let size = (h as f64, w as f64);
    let short = h.min(w) as f64;
    let m = spec.motif;

    let bg = Background {
        freq: (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)),
        phase: rng.gen_range(0.0..2.0 * PI),
        amp: rng.gen_range(10.0..18.0),
    };
    let period = rng.gen_range(12.0..24.0);
    let phase_t = rng.gen_range(0.0..2.0 * PI);
    let radius = short * rng.gen_range(m.blob_radius.0..=m.blob_radius.1);
    let margin = radius + m.motion_amplitude + 1.0;
    let center = (
        rng.gen_range(margin..(size.0 - margin).max(margin + 1e-9)),
        rng.gen_range(margin..(size.1 - margin).max(margin + 1e-9)),
    );
    // Lesion tint: same distribution for benign and malignant.
    let tint_scale = rng.gen_range(25.0..45.0);
    let tint = [tint_scale, -0.4 * tint_scale, -0.3 * tint_scale];
    let lobes: Vec<(f64, f64)> = (0..5).map(|_| (rng.gen_range(0.05..0.18), rng.gen_range(0.0..2.0 * PI))).collect();
    // Texture cells are 2×2 pixels so they survive 2× downsampling.
    let cell = 2usize;

    let mut frames = Vec::with_capacity(spec.frames);
    let mut buf = alloc::vec![0.0f64; h * w * 3];
    for t in 0..spec.frames {
        let osc = libm::sin(2.0 * PI * t as f64 / period + phase_t);
        let osc2 = libm::cos(2.0 * PI * t as f64 / period + phase_t);
        let drift = match label {
            TriLabel::Normal => (m.motion_amplitude * osc, m.motion_amplitude * osc2),
            _ => (0.0, 0.0),
        };
        let (cy, cx) = match label {
            TriLabel::Benign => (center.0 + m.motion_amplitude * osc, center.1 + m.motion_amplitude * osc2),
            _ => center,
        };
        let jitter: Vec<f64> = lobes.iter().map(|_| rng.gen_range(-0.6..0.6)).collect();
        let cells_w = w.div_ceil(cell);
        let texture: Vec<f64> = match label {
            TriLabel::Malignant => (0..h.div_ceil(cell) * cells_w)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
            _ => Vec::new(),
        };

        for y in 0..h {
            for x in 0..w {
                let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
                let shade = bg.value(fy, fx, drift, size);
                let mut px = [shade; 3];
                let (dy, dx) = (fy - cy, fx - cx);
                let dist = libm::sqrt(dy * dy + dx * dx);
                let weight = match label {
                    TriLabel::Normal => 0.0,
                    TriLabel::Benign => {
                        // smooth cosine-profile disc
                        if dist < radius {
                            0.5 * (1.0 + libm::cos(PI * dist / radius))
                        } else {
                            0.0
                        }
                    }
                    TriLabel::Malignant => {
                        let theta = libm::atan2(dy, dx);
                        let wobble: f64 = lobes
                            .iter()
                            .zip(&jitter)
                            .enumerate()
                            .map(|(k, (&(a, ph), &j))| a * libm::sin((k + 2) as f64 * theta + ph + j))
                            .sum();
                        if dist < radius * (1.0 + wobble) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                if weight > 0.0 {
                    let grain = if label == TriLabel::Malignant {
                        m.texture_roughness * texture[(y / cell) * cells_w + x / cell]
                    } else {
                        0.0
                    };
                    for c in 0..3 {
                        px[c] += weight * (tint[c] + grain);
                    }
                }
                buf[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&px);
            }
        }
        frames.push(pin_mean(&buf, h, w));
    }
    frames
}

/// Shifts each channel so its mean equals [`BASE_COLOR`], then quantizes.
fn pin_mean(buf: &[f64], h: usize, w: usize) -> Image<u8> {
    let n = (h * w) as f64;
    let mut offset = [0.0; 3];
    for c in 0..3 {
        let mean = buf.iter().skip(c).step_by(3).sum::<f64>() / n;
        offset[c] = BASE_COLOR[c] - mean;
    }
    let data = buf
        .iter()
        .enumerate()
        .map(|(i, &v)| libm::round(v + offset[i % 3]).clamp(0.0, 255.0) as u8)
        .collect();
    Image {
        height: h,
        width: w,
        channels: 3,
        data,
    }
}
