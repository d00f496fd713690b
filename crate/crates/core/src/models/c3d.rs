//! C3D-style backbone: stacked 3×3×3 convolutions with ReLU and max pooling,
//! then a fully-connected stack ending in class logits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::kernels::pool_output;
use crate::nn::linear;
use crate::params::{Bound, Initializer, ModelParams};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C3dConfig {
    /// Clip extent `(T, H, W)` the classifier head is sized for.
    pub input: [usize; 3],
    pub conv_channels: Vec<usize>,
    pub kernel: [usize; 3],
    /// Pooling window (and stride) applied after each conv layer, if any.
    pub pool_schedule: Vec<Option<[usize; 3]>>,
    pub fc_widths: Vec<usize>,
    pub num_classes: usize,
}

impl C3dConfig {
    /// Three conv stages sized for CPU tests.
    pub fn toy() -> Self {
        Self {
            input: [8, 32, 32],
            conv_channels: vec![16, 32, 64],
            kernel: [3, 3, 3],
            pool_schedule: vec![Some([1, 2, 2]), Some([2, 2, 2]), Some([2, 2, 2])],
            fc_widths: vec![64],
            num_classes: 2,
        }
    }

    /// Original topology: 8 convolutions, 5 pools, two 4096-wide fc layers.
    pub fn full_scale() -> Self {
        let p = Some([2, 2, 2]);
        Self {
            input: [16, 112, 112],
            conv_channels: vec![64, 128, 256, 256, 512, 512, 512, 512],
            kernel: [3, 3, 3],
            pool_schedule: vec![Some([1, 2, 2]), p, None, p, None, p, None, p],
            fc_widths: vec![4096, 4096],
            num_classes: 2,
        }
    }

    /// Feature extent `(C, T, H, W)` after the last conv stage.
    pub fn feature_extent(&self) -> Result<[usize; 4]> {
        self.validate_shape()?;
        let mut ext = self.input;
        for pool in self.pool_schedule.iter().flatten() {
            ext = pool_output(ext, *pool, *pool).map_err(|_| {
                Error::Config(format!("pooling {pool:?} collapses extent {ext:?} to zero"))
            })?;
        }
        let c = *self.conv_channels.last().unwrap();
        Ok([c, ext[0], ext[1], ext[2]])
    }

    fn validate_shape(&self) -> Result<()> {
        if self.kernel != [3, 3, 3] {
            return Err(Error::Config(format!("kernel must be 3×3×3, got {:?}", self.kernel)));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::Config("conv_channels must be non-empty and positive".into()));
        }
        if self.pool_schedule.len() != self.conv_channels.len() {
            return Err(Error::Config(format!(
                "pool_schedule has {} entries for {} conv layers",
                self.pool_schedule.len(),
                self.conv_channels.len()
            )));
        }
        if self.input.contains(&0) || self.num_classes < 2 || self.fc_widths.contains(&0) {
            return Err(Error::Config("extents, widths and class count must be positive".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_extent().map(|_| ())
    }

    fn flat_features(&self) -> Result<usize> {
        Ok(self.feature_extent()?.iter().product())
    }
}

pub fn c3d_init<T: Real>(config: &C3dConfig, seed: u64) -> Result<ModelParams<T>> {
    let mut params = ModelParams::new();
    let mut init = Initializer::new(&mut params, seed);
    let mut c_in = 3;
    for (i, &c_out) in config.conv_channels.iter().enumerate() {
        let fan_in = c_in * 27;
        init.he_uniform(&format!("conv{}.weight", i + 1), &[c_out, c_in, 3, 3, 3], fan_in);
        init.zeros(&format!("conv{}.bias", i + 1), &[c_out]);
        c_in = c_out;
    }
    let mut width = config.flat_features()?;
    for (j, &w) in config.fc_widths.iter().enumerate() {
        init.he_uniform(&format!("fc{}.weight", j + 1), &[width, w], width);
        init.zeros(&format!("fc{}.bias", j + 1), &[w]);
        width = w;
    }
    init.he_uniform("head.weight", &[width, config.num_classes], width);
    init.zeros("head.bias", &[config.num_classes]);
    Ok(params)
}

/// `batch[N×3×T×H×W]` → logits `[N×classes]`.
pub fn c3d_forward<T: Real>(g: &mut Graph<T>, config: &C3dConfig, bound: &Bound, batch: Var) -> Result<Var> {
    let shape = g.shape(batch).to_vec();
    if shape.len() != 5 || shape[1] != 3 || shape[2..] != config.input {
        return Err(Error::Config(format!(
            "c3d expects [N, 3, {}, {}, {}], got {shape:?}",
            config.input[0], config.input[1], config.input[2]
        )));
    }
    let n = shape[0];
    let mut x = batch;
    for (i, pool) in config.pool_schedule.iter().enumerate() {
        let w = bound.get(&format!("conv{}.weight", i + 1))?;
        let b = bound.get(&format!("conv{}.bias", i + 1))?;
        x = g.conv3d(x, w, Some(b), [1, 1, 1], [1, 1, 1])?;
        x = g.relu(x);
        if let Some(win) = pool {
            x = g.max_pool3d(x, *win, *win)?;
        }
    }
    let flat: usize = g.shape(x)[1..].iter().product();
    x = g.reshape(x, &[n, flat])?;
    for j in 0..config.fc_widths.len() {
        x = linear(g, bound, &format!("fc{}", j + 1), x)?;
        x = g.relu(x);
    }
    linear(g, bound, "head", x)
}
