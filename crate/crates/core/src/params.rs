//! Named parameter sets shared by all backbones.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::real::Real;
use crate::tensor::Tensor;

/// Parameters keyed by stable dotted names; iteration is in sorted name order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ModelParams<T> {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn num_elements(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }

    /// Checks that `self` has exactly the names and shapes of `reference`.
    pub fn check_layout(&self, reference: &Self) -> Result<()> {
        for (name, t) in &reference.tensors {
            let found = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::MissingParameter(name.clone()))?;
            if found.shape() != t.shape() {
                return Err(Error::ParameterShape {
                    name: name.clone(),
                    expected: t.shape().to_vec(),
                    found: found.shape().to_vec(),
                });
            }
        }
        if let Some(extra) = self.tensors.keys().find(|k| !reference.tensors.contains_key(*k)) {
            return Err(Error::Config(alloc::format!("unexpected parameter `{extra}`")));
        }
        Ok(())
    }

    /// Puts every parameter on the tape as a trainable leaf.
    pub fn bind(&self, g: &mut Graph<T>) -> Bound {
        Bound {
            vars: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), g.param(v.clone())))
                .collect(),
        }
    }

    /// Same as [`ModelParams::bind`] but without gradient tracking.
    pub fn bind_frozen(&self, g: &mut Graph<T>) -> Bound {
        Bound {
            vars: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), g.constant(v.clone())))
                .collect(),
        }
    }
}

/// Parameter name → tape handle.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Collects `∂loss/∂param` for every bound parameter after backward.
    pub fn grads<T: Real>(&self, g: &Graph<T>) -> BTreeMap<String, Vec<T>> {
        self.vars
            .iter()
            .map(|(k, &v)| {
                let grad = g
                    .grad(v)
                    .map(<[T]>::to_vec)
                    .unwrap_or_else(|| alloc::vec![T::ZERO; g.value(v).numel()]);
                (k.clone(), grad)
            })
            .collect()
    }
}

impl FromIterator<(String, Var)> for Bound {
    fn from_iter<I: IntoIterator<Item = (String, Var)>>(iter: I) -> Self {
        Self { vars: iter.into_iter().collect() }
    }
}

fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Builds parameters with per-name random streams, so initial values depend
/// only on the seed and the parameter name.
pub struct Initializer<'a, T> {
    pub params: &'a mut ModelParams<T>,
    seed: u64,
}

impl<'a, T: Real> Initializer<'a, T> {
    pub fn new(params: &'a mut ModelParams<T>, seed: u64) -> Self {
        Self { params, seed }
    }

    fn rng(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ name_hash(name))
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) {
        let mut rng = self.rng(name);
        let t = Tensor::from_fn(shape, |_| T::from_f64(rng.gen_range(-bound..=bound)));
        self.params.insert(name, t);
    }

    /// He-uniform: `U(±√(6/fan_in))`.
    pub fn he_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) {
        self.uniform(name, shape, libm::sqrt(6.0 / fan_in as f64));
    }

    /// Xavier/Glorot-uniform: `U(±√(6/(fan_in+fan_out)))`.
    pub fn xavier_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize, fan_out: usize) {
        self.uniform(name, shape, libm::sqrt(6.0 / (fan_in + fan_out) as f64));
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) {
        self.params.insert(name, Tensor::zeros(shape));
    }

    pub fn ones(&mut self, name: &str, shape: &[usize]) {
        self.params.insert(name, Tensor::full(shape, T::ONE));
    }

    /// Linear layer stored as `weight[in×out]`, `bias[out]`.
    pub fn linear(&mut self, prefix: &str, d_in: usize, d_out: usize, bias: bool) {
        self.xavier_uniform(&alloc::format!("{prefix}.weight"), &[d_in, d_out], d_in, d_out);
        if bias {
            self.zeros(&alloc::format!("{prefix}.bias"), &[d_out]);
        }
    }

    pub fn layer_norm(&mut self, prefix: &str, width: usize) {
        self.ones(&alloc::format!("{prefix}.weight"), &[width]);
        self.zeros(&alloc::format!("{prefix}.bias"), &[width]);
    }
}
