//! Layer building blocks composed from tape operations.

mod attention;

pub use attention::{attention, register_attention, AttentionWeights};

use alloc::format;
use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{Bound, Initializer};
use crate::real::Real;

pub const LN_EPS: f64 = 1e-5;

/// `x[..., in] · weight[in×out] + bias` under parameter prefix `prefix`.
pub fn linear<T: Real>(g: &mut Graph<T>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let w = bound.get(&format!("{prefix}.weight"))?;
    let b = bound.get(&format!("{prefix}.bias")).ok();
    linear_with(g, x, w, b)
}

pub fn linear_with<T: Real>(g: &mut Graph<T>, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    let d_in = *shape.last().unwrap();
    let d_out = g.shape(w).get(1).copied().unwrap_or(0);
    let rows = shape.iter().product::<usize>() / d_in;
    let flat = g.reshape(x, &[rows, d_in])?;
    let mut y = g.matmul(flat, w)?;
    if let Some(b) = b {
        y = g.add_bias(y, b, 1)?;
    }
    let mut out_shape: Vec<usize> = shape;
    *out_shape.last_mut().unwrap() = d_out;
    g.reshape(y, &out_shape)
}

pub fn layer_norm<T: Real>(g: &mut Graph<T>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let gamma = bound.get(&format!("{prefix}.weight"))?;
    let beta = bound.get(&format!("{prefix}.bias"))?;
    let width = g.shape(gamma)[0];
    g.layer_norm(x, width, gamma, beta, T::from_f64(LN_EPS))
}

/// Two-layer GELU perceptron: `fc2(gelu(fc1(x)))`.
pub fn mlp<T: Real>(g: &mut Graph<T>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let h = linear(g, bound, &format!("{prefix}.fc1"), x)?;
    let h = g.gelu(h);
    linear(g, bound, &format!("{prefix}.fc2"), h)
}

pub fn register_mlp<T: Real>(init: &mut Initializer<'_, T>, prefix: &str, dim: usize, hidden: usize) {
    init.linear(&format!("{prefix}.fc1"), dim, hidden, true);
    init.linear(&format!("{prefix}.fc2"), hidden, dim, true);
}

/// `x + f(norm(x))`, the pre-norm residual pattern used by every transformer block.
pub fn pre_norm_residual<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound,
    norm_prefix: &str,
    x: Var,
    f: impl FnOnce(&mut Graph<T>, Var) -> Result<Var>,
) -> Result<Var> {
    let h = layer_norm(g, bound, norm_prefix, x)?;
    let h = f(g, h)?;
    g.add(x, h)
}
