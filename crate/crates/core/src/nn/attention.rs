use alloc::format;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::nn::linear_with;
use crate::params::{Bound, Initializer};
use crate::real::Real;

/// Projection handles for one multi-head self-attention layer.
#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights {
    pub q: (Var, Var),
    pub k: (Var, Var),
    pub v: (Var, Var),
    pub proj: (Var, Var),
}

impl AttentionWeights {
    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        let pair = |n: &str| -> Result<(Var, Var)> {
            Ok((
                bound.get(&format!("{prefix}.{n}.weight"))?,
                bound.get(&format!("{prefix}.{n}.bias"))?,
            ))
        };
        Ok(Self {
            q: pair("q")?,
            k: pair("k")?,
            v: pair("v")?,
            proj: pair("proj")?,
        })
    }
}

pub fn register_attention<T: Real>(init: &mut Initializer<'_, T>, prefix: &str, dim: usize) {
    for n in ["q", "k", "v", "proj"] {
        init.linear(&format!("{prefix}.{n}"), dim, dim, true);
    }
}

fn split_heads<T: Real>(g: &mut Graph<T>, x: Var, b: usize, l: usize, heads: usize, dh: usize) -> Result<Var> {
    let x = g.reshape(x, &[b, l, heads, dh])?;
    let x = g.permute(x, &[0, 2, 1, 3])?;
    g.reshape(x, &[b * heads, l, dh])
}

/// Multi-head self-attention over `x[B×L×D]`.
///
/// `logit_bias`, when given, has shape `[B·heads × L × L]` and is added to the
/// scaled scores before the softmax (relative position bias, `-inf` masks).
/// Returns the projected output `[B×L×D]` and the attention weights
/// `[B·heads × L × L]`.
pub fn attention<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    w: &AttentionWeights,
    heads: usize,
    logit_bias: Option<Var>,
) -> Result<(Var, Var)> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 3 || heads == 0 || !shape[2].is_multiple_of(heads) {
        return Err(Error::Config(format!(
            "attention input {shape:?} incompatible with {heads} heads"
        )));
    }
    let (b, l, d) = (shape[0], shape[1], shape[2]);
    let dh = d / heads;
    let q = linear_with(g, x, w.q.0, Some(w.q.1))?;
    let k = linear_with(g, x, w.k.0, Some(w.k.1))?;
    let v = linear_with(g, x, w.v.0, Some(w.v.1))?;
    let q = split_heads(g, q, b, l, heads, dh)?;
    let k = split_heads(g, k, b, l, heads, dh)?;
    let v = split_heads(g, v, b, l, heads, dh)?;
    let kt = g.permute(k, &[0, 2, 1])?;
    let scores = g.bmm(q, kt)?;
    let mut scores = g.scale(scores, T::ONE / T::from_usize(dh).sqrt());
    if let Some(bias) = logit_bias {
        scores = g.add(scores, bias)?;
    }
    let attn = g.softmax(scores, 2)?;
    let out = g.bmm(attn, v)?;
    let out = g.reshape(out, &[b, heads, l, dh])?;
    let out = g.permute(out, &[0, 2, 1, 3])?;
    let out = g.reshape(out, &[b, l, d])?;
    let out = linear_with(g, out, w.proj.0, Some(w.proj.1))?;
    Ok((out, attn))
}
