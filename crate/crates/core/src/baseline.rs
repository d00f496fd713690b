//! Frame-mean colour baseline: logistic regression on a clip's per-channel
//! mean. A dataset whose classes this separates is solvable from colour
//! statistics alone.

use alloc::vec::Vec;

use crate::clip::Clip;
use crate::error::{Error, Result};

pub fn frame_mean_features(clip: &Clip) -> [f64; 3] {
    let plane = clip.data.numel() / 3;
    core::array::from_fn(|c| {
        clip.data.data()[c * plane..(c + 1) * plane]
            .iter()
            .map(|&v| v as f64)
            .sum::<f64>()
            / plane as f64
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMeanBaseline {
    mean: [f64; 3],
    scale: [f64; 3],
    weights: [f64; 3],
    bias: f64,
}

impl FrameMeanBaseline {
    /// Full-batch gradient descent on standardized features.
    pub fn fit(clips: &[&Clip]) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::InvalidArgument("baseline needs training clips".into()));
        }
        let feats: Vec<[f64; 3]> = clips.iter().map(|c| frame_mean_features(c)).collect();
        let n = feats.len() as f64;
        let mean: [f64; 3] = core::array::from_fn(|c| feats.iter().map(|f| f[c]).sum::<f64>() / n);
        let scale: [f64; 3] = core::array::from_fn(|c| {
            let var = feats.iter().map(|f| (f[c] - mean[c]) * (f[c] - mean[c])).sum::<f64>() / n;
            if var > 0.0 {
                libm::sqrt(var)
            } else {
                1.0
            }
        });
        let mut model = Self {
            mean,
            scale,
            weights: [0.0; 3],
            bias: 0.0,
        };
        let xs: Vec<[f64; 3]> = feats.iter().map(|f| model.standardize(f)).collect();
        for _ in 0..2000 {
            let mut gw = [0.0; 3];
            let mut gb = 0.0;
            for (x, clip) in xs.iter().zip(clips) {
                let err = sigmoid(model.score(x)) - clip.label as f64;
                for (g, &xc) in gw.iter_mut().zip(x) {
                    *g += err * xc / n;
                }
                gb += err / n;
            }
            for (w, g) in model.weights.iter_mut().zip(gw) {
                *w -= 0.5 * g;
            }
            model.bias -= 0.5 * gb;
        }
        Ok(model)
    }

    fn standardize(&self, f: &[f64; 3]) -> [f64; 3] {
        core::array::from_fn(|c| (f[c] - self.mean[c]) / self.scale[c])
    }

    fn score(&self, x: &[f64; 3]) -> f64 {
        self.bias + (0..3).map(|c| self.weights[c] * x[c]).sum::<f64>()
    }

    pub fn predict(&self, clip: &Clip) -> usize {
        let x = self.standardize(&frame_mean_features(clip));
        usize::from(self.score(&x) > 0.0)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}
