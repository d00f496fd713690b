//! Clip preprocessing math: frame sampling, bilinear resize, horizontal
//! flip, normalization and channel-first stacking. Frame decoding and file
//! access live in the `lsptm` crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Placement {
    Center,
    Start,
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShortVideoMode {
    /// Indices wrap modulo the frame count.
    #[default]
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub count: usize,
    pub stride: usize,
    pub placement: Placement,
    #[serde(default)]
    pub short_video_mode: ShortVideoMode,
}

impl Default for SamplingPolicy {
    /// 32 frames, two apart, centred.
    fn default() -> Self {
        Self {
            count: 32,
            stride: 2,
            placement: Placement::Center,
            short_video_mode: ShortVideoMode::Loop,
        }
    }
}

impl SamplingPolicy {
    /// Frames covered from first to last sampled index.
    pub fn span(&self) -> usize {
        (self.count - 1) * self.stride + 1
    }
}

/// Indices of the frames making up one clip out of `total` frames.
pub fn sample_indices(total: usize, policy: &SamplingPolicy) -> Result<Vec<usize>> {
    if total == 0 {
        return Err(Error::InvalidArgument("video has no frames".into()));
    }
    if policy.count == 0 || policy.stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "sampling count and stride must be ≥ 1, got {} and {}",
            policy.count, policy.stride
        )));
    }
    let span = policy.span();
    if total < span {
        let ShortVideoMode::Loop = policy.short_video_mode;
        return Ok((0..policy.count).map(|i| (i * policy.stride) % total).collect());
    }
    let slack = total - span;
    let start = match policy.placement {
        Placement::Center => slack / 2,
        Placement::Start => 0,
        Placement::Random { seed } => ChaCha8Rng::seed_from_u64(seed).gen_range(0..=slack),
    };
    Ok((0..policy.count).map(|i| start + i * policy.stride).collect())
}

/// Interleaved `H×W×C` image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<P> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<P>,
}

impl<P: Copy> Image<P> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<P>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "image buffer of {} values for {height}×{width}×{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn pixel(&self, y: usize, x: usize, c: usize) -> P {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// Column order reversed within every row; channels untouched.
pub fn hflip<P: Copy>(frame: &Image<P>) -> Image<P> {
    let c = frame.channels;
    let mut data = Vec::with_capacity(frame.data.len());
    for row in frame.data.chunks_exact(frame.width * c) {
        for px in row.chunks_exact(c).rev() {
            data.extend_from_slice(px);
        }
    }
    Image { data, ..*frame }
}

/// Half-pixel-centre coordinate and neighbour weights along one axis.
fn taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f32)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let lo = libm::floor(src) as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, (src - lo as f64) as f32)
        })
        .collect()
}

/// Bilinear resize with half-pixel-centre mapping and edge clamping.
pub fn resize_bilinear(frame: &Image<u8>, out_h: usize, out_w: usize) -> Result<Image<f32>> {
    if frame.height == 0 || frame.width == 0 || frame.channels == 0 {
        return Err(Error::InvalidArgument("cannot resize an empty image".into()));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(format!("target size {out_h}×{out_w}")));
    }
    let c = frame.channels;
    let ys = taps(out_h, frame.height);
    let xs = taps(out_w, frame.width);
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |y, x| frame.pixel(y, x, ch) as f32;
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Image::new(out_h, out_w, c, data)
}

/// Per-channel input statistics on the `[0, 1]` scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for NormStats {
    fn default() -> Self {
        Self {
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }
}

/// `out[c,…] = (in[c,…]/255 − mean[c]) / std[c]` on a channel-first clip.
pub fn normalize(clip: &Tensor<f32>, stats: &NormStats) -> Result<Tensor<f32>> {
    let shape = clip.shape();
    if shape[0] != 3 {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "normalize expects 3 leading channels".into(),
        });
    }
    let plane = clip.numel() / 3;
    let data = clip
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i / plane;
            (v / 255.0 - stats.mean[c]) / stats.std[c]
        })
        .collect();
    Tensor::new(shape, data)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Augment {
    #[default]
    None,
    /// Horizontal flip of the whole clip with probability `p`.
    Hflip { p: f64, seed: u64 },
}

impl Augment {
    /// One Bernoulli draw per clip.
    pub fn flips(&self) -> Result<bool> {
        match *self {
            Augment::None => Ok(false),
            Augment::Hflip { p, seed } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!("flip probability {p}")));
                }
                Ok(ChaCha8Rng::seed_from_u64(seed).gen_bool(p))
            }
        }
    }
}

/// A model-ready clip `[3×T×H×W]` with its binary label.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub data: Tensor<f32>,
    pub label: usize,
    pub source_id: String,
}

/// Resize → optional flip → normalize → channel-first stacking, for frames
/// that were already sampled and decoded.
pub fn assemble_clip(
    frames: &[Image<u8>],
    target: (usize, usize),
    flip: bool,
    stats: &NormStats,
) -> Result<Tensor<f32>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("clip needs at least one frame".into()))?;
    if first.channels != 3 {
        return Err(Error::InvalidArgument(format!("frames have {} channels, expected 3", first.channels)));
    }
    if let Some(bad) = frames
        .iter()
        .position(|f| (f.height, f.width, f.channels) != (first.height, first.width, first.channels))
    {
        return Err(Error::InvalidArgument(format!(
            "frame {bad} is {}×{}, clip started at {}×{}",
            frames[bad].height, frames[bad].width, first.height, first.width
        )));
    }
    let (h, w) = target;
    let t = frames.len();
    let mut data = alloc::vec![0.0f32; 3 * t * h * w];
    for (f, frame) in frames.iter().enumerate() {
        let mut img = resize_bilinear(frame, h, w)?;
        if flip {
            img = hflip(&img);
        }
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    data[((c * t + f) * h + y) * w + x] = img.pixel(y, x, c);
                }
            }
        }
    }
    normalize(&Tensor::new(&[3, t, h, w], data)?, stats)
}
