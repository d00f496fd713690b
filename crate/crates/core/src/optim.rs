//! First-order optimizers over named parameter sets.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::params::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adamw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
}

/// Optimizer state. Weight decay only touches matrices and kernels
/// (rank ≥ 2); biases, norms and 1-D tables are exempt.
pub struct Optimizer {
    settings: OptimizerSettings,
    step: u64,
    first: BTreeMap<String, Vec<f32>>,
    second: BTreeMap<String, Vec<f32>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(settings: OptimizerSettings) -> Self {
        Self {
            settings,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<f32>, grads: &BTreeMap<String, Vec<f32>>) {
        self.step += 1;
        let s = self.settings;
        let lr = s.lr as f32;
        let wd = s.weight_decay as f32;
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let decay = p.rank() >= 2;
            let n = p.numel();
            let m = self.first.entry(name.into()).or_insert_with(|| vec![0.0; n]);
            match s.kind {
                OptimizerKind::SgdMomentum => {
                    let mu = s.momentum as f32;
                    for ((w, &gi), v) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()) {
                        let gi = if decay { gi + wd * *w } else { gi };
                        *v = mu * *v + gi;
                        *w -= lr * *v;
                    }
                }
                OptimizerKind::Adamw => {
                    let v2 = self.second.entry(name.into()).or_insert_with(|| vec![0.0; n]);
                    let (b1, b2) = (BETA1 as f32, BETA2 as f32);
                    let bc1 = 1.0 - libm::pow(BETA1, self.step as f64) as f32;
                    let bc2 = 1.0 - libm::pow(BETA2, self.step as f64) as f32;
                    for (((w, &gi), m1), m2) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v2.iter_mut()) {
                        *m1 = b1 * *m1 + (1.0 - b1) * gi;
                        *m2 = b2 * *m2 + (1.0 - b2) * gi * gi;
                        let mhat = *m1 / bc1;
                        let vhat = *m2 / bc2;
                        if decay {
                            *w -= lr * wd * *w;
                        }
                        *w -= lr * mhat / (libm::sqrtf(vhat) + ADAM_EPS as f32);
                    }
                }
            }
        }
    }
}
