//! Divided space-time attention transformer over frame-level patches.
//!
//! Each block runs temporal attention (every spatial location attends across
//! frames), then spatial attention (every frame attends across locations),
//! then an MLP, all as pre-norm residuals.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::nn::{self, attention, register_attention, register_mlp, AttentionWeights};
use crate::params::{Bound, Initializer, ModelParams};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsfConfig {
    /// Clip extent `(T, H, W)`; sizes the position tables.
    pub input: [usize; 3],
    pub patch: usize,
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub num_classes: usize,
}

impl TsfConfig {
    pub fn toy() -> Self {
        Self {
            input: [8, 32, 32],
            patch: 8,
            embed_dim: 32,
            depth: 2,
            heads: 2,
            mlp_ratio: 4,
            num_classes: 2,
        }
    }

    pub fn full_scale() -> Self {
        Self {
            input: [8, 224, 224],
            patch: 16,
            embed_dim: 768,
            depth: 12,
            heads: 12,
            mlp_ratio: 4,
            num_classes: 2,
        }
    }

    /// Patches per frame.
    pub fn tokens_per_frame(&self) -> usize {
        (self.input[1] / self.patch) * (self.input[2] / self.patch)
    }

    pub fn validate(&self) -> Result<()> {
        let [t, h, w] = self.input;
        if t == 0 || self.patch == 0 || h % self.patch != 0 || w % self.patch != 0 || h == 0 || w == 0 {
            return Err(Error::Config(format!(
                "frame {h}×{w} is not divisible by patch {}",
                self.patch
            )));
        }
        if self.embed_dim == 0 || self.heads == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            )));
        }
        if self.depth == 0 || self.mlp_ratio == 0 || self.num_classes < 2 {
            return Err(Error::Config("depth, mlp_ratio and num_classes must be positive".into()));
        }
        Ok(())
    }
}

pub fn tsf_init<T: Real>(config: &TsfConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let d = config.embed_dim;
    let patch_len = 3 * config.patch * config.patch;
    let mut params = ModelParams::new();
    let mut init = Initializer::new(&mut params, seed);
    init.linear("patch_embed", patch_len, d, true);
    init.uniform("pos_embed.spatial", &[config.tokens_per_frame(), d], 0.02);
    init.uniform("pos_embed.temporal", &[config.input[0], d], 0.02);
    for i in 0..config.depth {
        let p = format!("blocks.{i}");
        init.layer_norm(&format!("{p}.norm_t"), d);
        register_attention(&mut init, &format!("{p}.attn_t"), d);
        init.layer_norm(&format!("{p}.norm_s"), d);
        register_attention(&mut init, &format!("{p}.attn_s"), d);
        init.layer_norm(&format!("{p}.norm_mlp"), d);
        register_mlp(&mut init, &format!("{p}.mlp"), d, d * config.mlp_ratio);
    }
    init.layer_norm("norm", d);
    init.linear("head", d, config.num_classes, true);
    Ok(params)
}

/// Gather index cutting `[N×3×T×H×W]` into per-frame patch vectors
/// `[N×T×S×(3·p·p)]`, features ordered `(channel, row, column)`.
pub fn patch_index(n: usize, t: usize, h: usize, w: usize, p: usize) -> Vec<usize> {
    let (gh, gw) = (h / p, w / p);
    let mut idx = Vec::with_capacity(n * 3 * t * h * w);
    for b in 0..n {
        for f in 0..t {
            for py in 0..gh {
                for px in 0..gw {
                    for c in 0..3 {
                        for dy in 0..p {
                            for dx in 0..p {
                                idx.push((((b * 3 + c) * t + f) * h + py * p + dy) * w + px * p + dx);
                            }
                        }
                    }
                }
            }
        }
    }
    idx
}

/// Broadcasts a `[rows×D]` table over `[N×T×S×D]`, with `along_time`
/// choosing whether table rows index frames or spatial locations.
fn broadcast_index(n: usize, t: usize, s: usize, d: usize, along_time: bool) -> Vec<usize> {
    let mut idx = Vec::with_capacity(n * t * s * d);
    for _ in 0..n {
        for f in 0..t {
            for loc in 0..s {
                let row = if along_time { f } else { loc };
                idx.extend(row * d..(row + 1) * d);
            }
        }
    }
    idx
}

/// Linear patch embedding plus spatial then temporal position embeddings:
/// `[N×3×T×H×W]` → token grid `[N×T×S×D]`.
pub fn patchify<T: Real>(g: &mut Graph<T>, config: &TsfConfig, bound: &Bound, batch: Var) -> Result<Var> {
    let shape = g.shape(batch).to_vec();
    if shape.len() != 5 || shape[1] != 3 || shape[2..] != config.input {
        return Err(Error::Config(format!(
            "timesformer expects [N, 3, {:?}], got {shape:?}",
            config.input
        )));
    }
    config.validate()?;
    let (n, t, h, w, p) = (shape[0], shape[2], shape[3], shape[4], config.patch);
    let s = config.tokens_per_frame();
    let d = config.embed_dim;
    let patches = g.gather(batch, patch_index(n, t, h, w, p), &[n, t, s, 3 * p * p])?;
    let x = nn::linear(g, bound, "patch_embed", patches)?;
    let spatial = bound.get("pos_embed.spatial")?;
    let temporal = bound.get("pos_embed.temporal")?;
    let sp = g.gather(spatial, broadcast_index(n, t, s, d, false), &[n, t, s, d])?;
    let x = g.add(x, sp)?;
    let tp = g.gather(temporal, broadcast_index(n, t, s, d, true), &[n, t, s, d])?;
    g.add(x, tp)
}

fn check_grid<T: Real>(g: &Graph<T>, x: Var) -> Result<[usize; 4]> {
    match *g.shape(x) {
        [n, t, s, d] => Ok([n, t, s, d]),
        ref other => Err(Error::InvalidShape {
            shape: other.to_vec(),
            reason: "expected token grid [N, T, S, D]".into(),
        }),
    }
}

/// Pre-norm residual attention across frames at each spatial location.
/// Returns the updated grid and the attention weights `[N·S·heads × T × T]`.
pub fn temporal_attention<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound,
    prefix: &str,
    x: Var,
    heads: usize,
) -> Result<(Var, Var)> {
    let [n, t, s, d] = check_grid(g, x)?;
    let h = nn::layer_norm(g, bound, &format!("{prefix}.norm_t"), x)?;
    let h = g.permute(h, &[0, 2, 1, 3])?;
    let h = g.reshape(h, &[n * s, t, d])?;
    let w = AttentionWeights::bind(bound, &format!("{prefix}.attn_t"))?;
    let (h, attn) = attention(g, h, &w, heads, None)?;
    let h = g.reshape(h, &[n, s, t, d])?;
    let h = g.permute(h, &[0, 2, 1, 3])?;
    Ok((g.add(x, h)?, attn))
}

/// Pre-norm residual attention across spatial locations within each frame.
/// Returns the updated grid and the attention weights `[N·T·heads × S × S]`.
pub fn spatial_attention<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound,
    prefix: &str,
    x: Var,
    heads: usize,
) -> Result<(Var, Var)> {
    let [n, t, s, d] = check_grid(g, x)?;
    let h = nn::layer_norm(g, bound, &format!("{prefix}.norm_s"), x)?;
    let h = g.reshape(h, &[n * t, s, d])?;
    let w = AttentionWeights::bind(bound, &format!("{prefix}.attn_s"))?;
    let (h, attn) = attention(g, h, &w, heads, None)?;
    let h = g.reshape(h, &[n, t, s, d])?;
    Ok((g.add(x, h)?, attn))
}

/// One divided block: temporal attention → spatial attention → MLP.
pub fn divided_block<T: Real>(g: &mut Graph<T>, bound: &Bound, prefix: &str, x: Var, heads: usize) -> Result<Var> {
    let (x, _) = temporal_attention(g, bound, prefix, x, heads)?;
    let (x, _) = spatial_attention(g, bound, prefix, x, heads)?;
    let mlp_prefix = format!("{prefix}.mlp");
    nn::pre_norm_residual(g, bound, &format!("{prefix}.norm_mlp"), x, |g, h| {
        nn::mlp(g, bound, &mlp_prefix, h)
    })
}

/// `batch[N×3×T×H×W]` → logits `[N×classes]`; tokens are mean-pooled.
pub fn tsf_forward<T: Real>(g: &mut Graph<T>, config: &TsfConfig, bound: &Bound, batch: Var) -> Result<Var> {
    let mut x = patchify(g, config, bound, batch)?;
    for i in 0..config.depth {
        x = divided_block(g, bound, &format!("blocks.{i}"), x, config.heads)?;
    }
    let [n, t, s, d] = check_grid(g, x)?;
    let x = nn::layer_norm(g, bound, "norm", x)?;
    let x = g.reshape(x, &[n, t * s, d])?;
    let x = g.mean_axis(x, 1)?;
    nn::linear(g, bound, "head", x)
}
