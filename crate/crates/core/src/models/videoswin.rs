//! Hierarchical video transformer with 3D windowed and shifted-window
//! attention, relative position bias and patch merging between stages.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var, GATHER_ZERO};
use crate::models::window::WindowGeom;
use crate::nn::{self, attention, register_attention, register_mlp, AttentionWeights};
use crate::params::{Bound, Initializer, ModelParams};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwinConfig {
    pub input: [usize; 3],
    pub patch: [usize; 3],
    pub window: [usize; 3],
    pub embed_dim: usize,
    pub depths: Vec<usize>,
    pub heads: Vec<usize>,
    pub mlp_ratio: usize,
    pub num_classes: usize,
}

impl SwinConfig {
    pub fn toy() -> Self {
        Self {
            input: [8, 32, 32],
            patch: [2, 4, 4],
            window: [2, 4, 4],
            embed_dim: 32,
            depths: vec![2, 2],
            heads: vec![2, 4],
            mlp_ratio: 4,
            num_classes: 2,
        }
    }

    /// The tiny variant of the reference backbone.
    pub fn full_scale() -> Self {
        Self {
            input: [32, 224, 224],
            patch: [2, 4, 4],
            window: [8, 7, 7],
            embed_dim: 96,
            depths: vec![2, 2, 6, 2],
            heads: vec![3, 6, 12, 24],
            mlp_ratio: 4,
            num_classes: 2,
        }
    }

    pub fn num_stages(&self) -> usize {
        self.depths.len()
    }

    pub fn stage_dim(&self, stage: usize) -> usize {
        self.embed_dim << stage
    }

    /// Token extent entering `stage`.
    pub fn stage_extent(&self, stage: usize) -> [usize; 3] {
        let mut e: [usize; 3] = core::array::from_fn(|d| self.input[d] / self.patch[d]);
        for _ in 0..stage {
            e = [e[0], e[1].div_ceil(2), e[2].div_ceil(2)];
        }
        e
    }

    pub fn stage_geom(&self, stage: usize) -> Result<WindowGeom> {
        WindowGeom::new(self.stage_extent(stage), self.window)
    }

    pub fn validate(&self) -> Result<()> {
        if (0..3).any(|d| self.patch[d] == 0 || self.input[d] == 0 || !self.input[d].is_multiple_of(self.patch[d])) {
            return Err(Error::Config(format!(
                "input {:?} not divisible by patch {:?}",
                self.input, self.patch
            )));
        }
        if self.window.contains(&0) {
            return Err(Error::Config("window extents must be positive".into()));
        }
        if self.depths.is_empty() || self.depths.len() != self.heads.len() || self.depths.contains(&0) {
            return Err(Error::Config("depths and heads must be non-empty and aligned".into()));
        }
        for (s, &h) in self.heads.iter().enumerate() {
            if h == 0 || !self.stage_dim(s).is_multiple_of(h) {
                return Err(Error::Config(format!(
                    "stage {s} width {} not divisible by {h} heads",
                    self.stage_dim(s)
                )));
            }
        }
        if self.embed_dim == 0 || self.mlp_ratio == 0 || self.num_classes < 2 {
            return Err(Error::Config("embed_dim, mlp_ratio and num_classes must be positive".into()));
        }
        Ok(())
    }
}

pub fn swin_init<T: Real>(config: &SwinConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut params = ModelParams::new();
    let mut init = Initializer::new(&mut params, seed);
    let patch_len = 3 * config.patch.iter().product::<usize>();
    init.linear("patch_embed", patch_len, config.embed_dim, true);
    for s in 0..config.num_stages() {
        let d = config.stage_dim(s);
        let geom = config.stage_geom(s)?;
        for b in 0..config.depths[s] {
            let p = format!("stages.{s}.blocks.{b}");
            init.layer_norm(&format!("{p}.norm1"), d);
            register_attention(&mut init, &format!("{p}.attn"), d);
            init.zeros(&format!("{p}.attn.rel_pos_bias"), &[geom.table_rows(), config.heads[s]]);
            init.layer_norm(&format!("{p}.norm2"), d);
            register_mlp(&mut init, &format!("{p}.mlp"), d, d * config.mlp_ratio);
        }
        if s + 1 < config.num_stages() {
            init.layer_norm(&format!("stages.{s}.merge.norm"), 4 * d);
            init.linear(&format!("stages.{s}.merge.reduction"), 4 * d, 2 * d, false);
        }
    }
    let d_last = config.stage_dim(config.num_stages() - 1);
    init.layer_norm("norm", d_last);
    init.linear("head", d_last, config.num_classes, true);
    Ok(params)
}

fn grid5<T: Real>(g: &Graph<T>, x: Var) -> Result<[usize; 5]> {
    match *g.shape(x) {
        [n, t, h, w, d] => Ok([n, t, h, w, d]),
        ref other => Err(Error::InvalidShape {
            shape: other.to_vec(),
            reason: "expected token grid [N, T', H', W', D]".into(),
        }),
    }
}

/// Result of one (shifted-)window attention pass.
pub struct WindowMsa {
    pub out: Var,
    /// Attention weights `[N·nW·heads × L × L]`.
    pub attn: Var,
}

/// Windowed multi-head self-attention over `x[N×T'×H'×W'×D]` (no norm, no
/// residual). With `shifted`, the grid is cyclically shifted by half a
/// window before partitioning and pairs from different pre-shift regions are
/// masked with `-inf`; padding tokens are always masked from real queries.
pub fn shifted_window_msa<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound,
    prefix: &str,
    x: Var,
    geom: &WindowGeom,
    heads: usize,
    shifted: bool,
) -> Result<WindowMsa> {
    let [n, t, h, w, d] = grid5(g, x)?;
    if [t, h, w] != geom.extent {
        return Err(Error::Config(format!(
            "token grid {:?} does not match window geometry {:?}",
            [t, h, w],
            geom.extent
        )));
    }
    let nw = geom.num_windows();
    let l = geom.window_len();
    let windows = g.gather(x, geom.partition_gather(n, d, shifted), &[n * nw, l, d])?;

    let table = bound.get(&format!("{prefix}.rel_pos_bias"))?;
    if g.shape(table) != [geom.table_rows(), heads] {
        return Err(Error::Config(format!(
            "relative position table {:?} does not match window {:?} with {heads} heads",
            g.shape(table),
            geom.table_window
        )));
    }
    let rel = geom.relative_index();
    let mut bias_index = Vec::with_capacity(n * nw * heads * l * l);
    for _ in 0..n * nw {
        for head in 0..heads {
            bias_index.extend(rel.iter().map(|&r| r * heads + head));
        }
    }
    let mut logit_bias = g.gather(table, bias_index, &[n * nw * heads, l, l])?;
    if geom.needs_mask(shifted) {
        let allowed = geom.attention_mask(shifted);
        let mut mask = Vec::with_capacity(n * nw * heads * l * l);
        for bw in 0..n * nw {
            let win = &allowed[(bw % nw) * l * l..(bw % nw + 1) * l * l];
            for _ in 0..heads {
                mask.extend(win.iter().map(|&ok| if ok { T::ZERO } else { T::NEG_INFINITY }));
            }
        }
        let mask = g.constant(Tensor::new(&[n * nw * heads, l, l], mask)?);
        logit_bias = g.add(logit_bias, mask)?;
    }

    let weights = AttentionWeights::bind(bound, prefix)?;
    let (out, attn) = attention(g, windows, &weights, heads, Some(logit_bias))?;
    let out = g.gather(out, geom.reverse_gather(n, d, shifted), &[n, t, h, w, d])?;
    Ok(WindowMsa { out, attn })
}

/// Pre-norm block: `x + WMSA(norm1(x))`, then `x + MLP(norm2(x))`.
pub fn swin_block<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound,
    prefix: &str,
    x: Var,
    geom: &WindowGeom,
    heads: usize,
    shifted: bool,
) -> Result<Var> {
    let attn_prefix = format!("{prefix}.attn");
    let x = nn::pre_norm_residual(g, bound, &format!("{prefix}.norm1"), x, |g, h| {
        Ok(shifted_window_msa(g, bound, &attn_prefix, h, geom, heads, shifted)?.out)
    })?;
    let mlp_prefix = format!("{prefix}.mlp");
    nn::pre_norm_residual(g, bound, &format!("{prefix}.norm2"), x, |g, h| {
        nn::mlp(g, bound, &mlp_prefix, h)
    })
}

/// Gather index concatenating 2×2 spatial neighbours along channels,
/// `[N×T×H×W×D]` → `[N×T×⌈H/2⌉×⌈W/2⌉×4D]`, zero-padding odd extents.
/// Channel blocks are ordered (even row, even col), (odd, even), (even, odd),
/// (odd, odd).
pub fn merge_index(n: usize, t: usize, h: usize, w: usize, d: usize) -> Vec<usize> {
    let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
    let mut idx = Vec::with_capacity(n * t * ho * wo * 4 * d);
    for b in 0..n {
        for f in 0..t {
            for y in 0..ho {
                for x in 0..wo {
                    for (dy, dx) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let (sy, sx) = (2 * y + dy, 2 * x + dx);
                        if sy >= h || sx >= w {
                            idx.extend(core::iter::repeat_n(GATHER_ZERO, d));
                        } else {
                            let base = (((b * t + f) * h + sy) * w + sx) * d;
                            idx.extend(base..base + d);
                        }
                    }
                }
            }
        }
    }
    idx
}

/// Halves spatial resolution and doubles width: gather 2×2 neighbours,
/// layer-norm over `4D`, project to `2D`. Time is untouched.
pub fn patch_merging<T: Real>(g: &mut Graph<T>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let [n, t, h, w, d] = grid5(g, x)?;
    let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
    let x = g.gather(x, merge_index(n, t, h, w, d), &[n, t, ho, wo, 4 * d])?;
    let x = nn::layer_norm(g, bound, &format!("{prefix}.norm"), x)?;
    nn::linear(g, bound, &format!("{prefix}.reduction"), x)
}

/// Gather index cutting `[N×3×T×H×W]` into `(pt,ph,pw)` blocks
/// `[N×T'×H'×W'×(3·pt·ph·pw)]`, features ordered `(c, dt, dh, dw)`.
pub fn patch_embed_index(n: usize, input: [usize; 3], patch: [usize; 3]) -> Vec<usize> {
    let [t, h, w] = input;
    let [pt, ph, pw] = patch;
    let (gt, gh, gw) = (t / pt, h / ph, w / pw);
    let mut idx = Vec::with_capacity(n * 3 * t * h * w);
    for b in 0..n {
        for bt in 0..gt {
            for bh in 0..gh {
                for bw in 0..gw {
                    for c in 0..3 {
                        for dt in 0..pt {
                            for dh in 0..ph {
                                for dw in 0..pw {
                                    idx.push(
                                        (((b * 3 + c) * t + bt * pt + dt) * h + bh * ph + dh) * w + bw * pw + dw,
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    idx
}

/// `batch[N×3×T×H×W]` → logits `[N×classes]`.
pub fn swin_forward<T: Real>(g: &mut Graph<T>, config: &SwinConfig, bound: &Bound, batch: Var) -> Result<Var> {
    config.validate()?;
    let shape = g.shape(batch).to_vec();
    if shape.len() != 5 || shape[1] != 3 || shape[2..] != config.input {
        return Err(Error::Config(format!(
            "videoswin expects [N, 3, {:?}], got {shape:?}",
            config.input
        )));
    }
    let n = shape[0];
    let e = config.stage_extent(0);
    let patch_len = 3 * config.patch.iter().product::<usize>();
    let mut x = g.gather(batch, patch_embed_index(n, config.input, config.patch), &[n, e[0], e[1], e[2], patch_len])?;
    x = nn::linear(g, bound, "patch_embed", x)?;
    for s in 0..config.num_stages() {
        let geom = config.stage_geom(s)?;
        for b in 0..config.depths[s] {
            let prefix = format!("stages.{s}.blocks.{b}");
            x = swin_block(g, bound, &prefix, x, &geom, config.heads[s], b % 2 == 1)?;
        }
        if s + 1 < config.num_stages() {
            x = patch_merging(g, bound, &format!("stages.{s}.merge"), x)?;
        }
    }
    let [n, t, h, w, d] = grid5(g, x)?;
    let x = nn::layer_norm(g, bound, "norm", x)?;
    let x = g.reshape(x, &[n, t * h * w, d])?;
    let x = g.mean_axis(x, 1)?;
    nn::linear(g, bound, "head", x)
}
