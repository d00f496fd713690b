//! Loop-level compositions of the three backbones, used as forward oracles.

#![allow(dead_code, clippy::needless_range_loop)]

use lsptm_core::models::{C3dConfig, SwinConfig, TsfConfig};
use lsptm_core::{ModelParams, Tensor};

use super::*;

type P = ModelParams<f64>;

pub fn c3d_ref(cfg: &C3dConfig, p: &P, input: &Tensor<f64>) -> Vec<Vec<f64>> {
    let n = input.shape()[0];
    let mut x = input.data().to_vec();
    let mut shape = [n, 3, cfg.input[0], cfg.input[1], cfg.input[2]];
    for (i, pool) in cfg.pool_schedule.iter().enumerate() {
        let w = p.get(&format!("conv{}.weight", i + 1)).unwrap();
        let ws: [usize; 5] = w.shape().try_into().unwrap();
        let b = param_vec(p, &format!("conv{}.bias", i + 1));
        let (y, ys) = conv3d_naive(&x, shape, w.data(), ws, &b, [1, 1, 1], [1, 1, 1]);
        x = y.into_iter().map(|v| v.max(0.0)).collect();
        shape = ys;
        if let Some(win) = pool {
            let (y, ys) = maxpool_naive(&x, shape, *win, *win);
            x = y;
            shape = ys;
        }
    }
    let flat = x.len() / n;
    (0..n)
        .map(|b| {
            let mut v = x[b * flat..(b + 1) * flat].to_vec();
            for j in 0..cfg.fc_widths.len() {
                v = linear_named(p, &format!("fc{}", j + 1), &v).into_iter().map(|z| z.max(0.0)).collect();
            }
            linear_named(p, "head", &v)
        })
        .collect()
}

fn at5(x: &Tensor<f64>, i: [usize; 5]) -> f64 {
    let s = x.shape();
    x.data()[(((i[0] * s[1] + i[1]) * s[2] + i[2]) * s[3] + i[3]) * s[4] + i[4]]
}

/// Divided space-time transformer: tokens `x[frame][location]`.
pub fn tsf_ref(cfg: &TsfConfig, p: &P, input: &Tensor<f64>) -> Vec<Vec<f64>> {
    let [t, h, w] = cfg.input;
    let pz = cfg.patch;
    let (gh, gw) = (h / pz, w / pz);
    let s = gh * gw;
    let none = |_: usize, _: usize, _: usize| 0.0;
    let all = |_: usize, _: usize| true;
    (0..input.shape()[0])
        .map(|b| {
            let mut x: Vec<Vec<Vec<f64>>> = (0..t)
                .map(|f| {
                    (0..s)
                        .map(|loc| {
                            let (py, px) = (loc / gw, loc % gw);
                            let mut patch = Vec::new();
                            for c in 0..3 {
                                for dy in 0..pz {
                                    for dx in 0..pz {
                                        patch.push(at5(input, [b, c, f, py * pz + dy, px * pz + dx]));
                                    }
                                }
                            }
                            let e = linear_named(p, "patch_embed", &patch);
                            let sp = &param_vec(p, "pos_embed.spatial")[loc * cfg.embed_dim..(loc + 1) * cfg.embed_dim];
                            let tp = &param_vec(p, "pos_embed.temporal")[f * cfg.embed_dim..(f + 1) * cfg.embed_dim];
                            add(&add(&e, sp), tp)
                        })
                        .collect()
                })
                .collect();
            for i in 0..cfg.depth {
                let pre = format!("blocks.{i}");
                let at = AttnRef::from_params(p, &format!("{pre}.attn_t"));
                for loc in 0..s {
                    let toks: Vec<Vec<f64>> = (0..t).map(|f| ln_ref_named(p, &format!("{pre}.norm_t"), &x[f][loc])).collect();
                    let (o, _) = mha_ref(&toks, &at, cfg.heads, &none, &all);
                    for f in 0..t {
                        x[f][loc] = add(&x[f][loc], &o[f]);
                    }
                }
                let asp = AttnRef::from_params(p, &format!("{pre}.attn_s"));
                for f in 0..t {
                    let toks: Vec<Vec<f64>> = (0..s).map(|l| ln_ref_named(p, &format!("{pre}.norm_s"), &x[f][l])).collect();
                    let (o, _) = mha_ref(&toks, &asp, cfg.heads, &none, &all);
                    for l in 0..s {
                        x[f][l] = add(&x[f][l], &o[l]);
                    }
                }
                for f in 0..t {
                    for l in 0..s {
                        let hn = ln_ref_named(p, &format!("{pre}.norm_mlp"), &x[f][l]);
                        x[f][l] = add(&x[f][l], &mlp_ref(p, &format!("{pre}.mlp"), &hn));
                    }
                }
            }
            let mut pooled = vec![0.0; cfg.embed_dim];
            for f in 0..t {
                for l in 0..s {
                    let v = ln_ref_named(p, "norm", &x[f][l]);
                    for e in 0..cfg.embed_dim {
                        pooled[e] += v[e] / (t * s) as f64;
                    }
                }
            }
            linear_named(p, "head", &pooled)
        })
        .collect()
}

/// Token grid over `[T', H', W']`, row-major.
pub struct Grid {
    pub extent: [usize; 3],
    pub tokens: Vec<Vec<f64>>,
}

impl Grid {
    fn idx(&self, c: [usize; 3]) -> usize {
        (c[0] * self.extent[1] + c[1]) * self.extent[2] + c[2]
    }
}

/// Window MSA by explicit enumeration of (shifted) window membership.
/// `tokens` are already normalised. Returns per-token outputs and, per
/// window in row-major order, the `L×L` permission matrix.
pub fn window_msa_ref(
    p: &P,
    prefix: &str,
    grid: &Grid,
    window_cfg: [usize; 3],
    heads: usize,
    shifted: bool,
) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let ext = grid.extent;
    let d = grid.tokens[0].len();
    let mut win = [0; 3];
    let mut shift = [0; 3];
    for a in 0..3 {
        win[a] = window_cfg[a].min(ext[a]);
        if shifted && ext[a] > window_cfg[a] {
            shift[a] = window_cfg[a] / 2;
        }
    }
    let pad: [usize; 3] = std::array::from_fn(|a| ext[a].div_ceil(win[a]) * win[a]);
    let table = p.get(&format!("{prefix}.rel_pos_bias")).unwrap();
    let region = |c: usize, a: usize| -> usize {
        if shift[a] == 0 || c < pad[a] - win[a] {
            0
        } else if c < pad[a] - shift[a] {
            1
        } else {
            2
        }
    };
    let w = AttnRef::from_params(p, prefix);
    let mut out = vec![vec![0.0; d]; grid.tokens.len()];
    let mut permissions = Vec::new();
    for bt in 0..pad[0] / win[0] {
        for bh in 0..pad[1] / win[1] {
            for bw in 0..pad[2] / win[2] {
                // members: (local coord, source coord or None for padding, region key)
                let mut members = Vec::new();
                for lt in 0..win[0] {
                    for lh in 0..win[1] {
                        for lw in 0..win[2] {
                            let sc = [bt * win[0] + lt, bh * win[1] + lh, bw * win[2] + lw];
                            let src: [usize; 3] = std::array::from_fn(|a| (sc[a] + shift[a]) % pad[a]);
                            let real = (0..3).all(|a| src[a] < ext[a]);
                            let key = (region(sc[0], 0), region(sc[1], 1), region(sc[2], 2), real);
                            members.push(([lt, lh, lw], real.then_some(src), key));
                        }
                    }
                }
                let toks: Vec<Vec<f64>> = members
                    .iter()
                    .map(|(_, src, _)| src.map_or(vec![0.0; d], |c| grid.tokens[grid.idx(c)].clone()))
                    .collect();
                let bias = |h: usize, i: usize, j: usize| {
                    let (a, b) = (members[i].0, members[j].0);
                    let off: [usize; 3] = std::array::from_fn(|x| a[x] + window_cfg[x] - 1 - b[x]);
                    let row = (off[0] * (2 * window_cfg[1] - 1) + off[1]) * (2 * window_cfg[2] - 1) + off[2];
                    table.data()[row * heads + h]
                };
                let allowed = |i: usize, j: usize| members[i].2 == members[j].2;
                let (o, _) = mha_ref(&toks, &w, heads, &bias, &allowed);
                for (i, (_, src, _)) in members.iter().enumerate() {
                    if let Some(c) = src {
                        out[grid.idx(*c)] = o[i].clone();
                    }
                }
                let l = members.len();
                permissions.push((0..l * l).map(|ij| allowed(ij / l, ij % l)).collect());
            }
        }
    }
    (out, permissions)
}

pub fn swin_block_ref(p: &P, prefix: &str, grid: &Grid, window: [usize; 3], heads: usize, shifted: bool) -> Grid {
    let normed = Grid {
        extent: grid.extent,
        tokens: grid.tokens.iter().map(|v| ln_ref_named(p, &format!("{prefix}.norm1"), v)).collect(),
    };
    let (attn, _) = window_msa_ref(p, &format!("{prefix}.attn"), &normed, window, heads, shifted);
    let tokens = grid
        .tokens
        .iter()
        .zip(&attn)
        .map(|(x, a)| {
            let x = add(x, a);
            let h = ln_ref_named(p, &format!("{prefix}.norm2"), &x);
            add(&x, &mlp_ref(p, &format!("{prefix}.mlp"), &h))
        })
        .collect();
    Grid { extent: grid.extent, tokens }
}

/// 2×2 neighbour concatenation in (0,0),(1,0),(0,1),(1,1) order with zero
/// fill, layer norm, bias-free projection.
pub fn patch_merge_ref(p: &P, prefix: &str, grid: &Grid) -> Grid {
    let [t, h, w] = grid.extent;
    let d = grid.tokens[0].len();
    let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
    let mut tokens = Vec::new();
    for f in 0..t {
        for y in 0..ho {
            for x in 0..wo {
                let mut cat = Vec::with_capacity(4 * d);
                for (dy, dx) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (sy, sx) = (2 * y + dy, 2 * x + dx);
                    if sy < h && sx < w {
                        cat.extend_from_slice(&grid.tokens[grid.idx([f, sy, sx])]);
                    } else {
                        cat.extend(std::iter::repeat_n(0.0, d));
                    }
                }
                let n = ln_ref_named(p, &format!("{prefix}.norm"), &cat);
                tokens.push(linear_named(p, &format!("{prefix}.reduction"), &n));
            }
        }
    }
    Grid { extent: [t, ho, wo], tokens }
}

pub fn swin_ref(cfg: &SwinConfig, p: &P, input: &Tensor<f64>) -> Vec<Vec<f64>> {
    let [pt, ph, pw] = cfg.patch;
    let ext = [cfg.input[0] / pt, cfg.input[1] / ph, cfg.input[2] / pw];
    (0..input.shape()[0])
        .map(|b| {
            let mut tokens = Vec::new();
            for bt in 0..ext[0] {
                for bh in 0..ext[1] {
                    for bw in 0..ext[2] {
                        let mut v = Vec::new();
                        for c in 0..3 {
                            for dt in 0..pt {
                                for dh in 0..ph {
                                    for dw in 0..pw {
                                        v.push(at5(input, [b, c, bt * pt + dt, bh * ph + dh, bw * pw + dw]));
                                    }
                                }
                            }
                        }
                        tokens.push(linear_named(p, "patch_embed", &v));
                    }
                }
            }
            let mut grid = Grid { extent: ext, tokens };
            for s in 0..cfg.depths.len() {
                for blk in 0..cfg.depths[s] {
                    grid = swin_block_ref(p, &format!("stages.{s}.blocks.{blk}"), &grid, cfg.window, cfg.heads[s], blk % 2 == 1);
                }
                if s + 1 < cfg.depths.len() {
                    grid = patch_merge_ref(p, &format!("stages.{s}.merge"), &grid);
                }
            }
            let d = grid.tokens[0].len();
            let mut pooled = vec![0.0; d];
            for v in &grid.tokens {
                let nv = ln_ref_named(p, "norm", v);
                for e in 0..d {
                    pooled[e] += nv[e] / grid.tokens.len() as f64;
                }
            }
            linear_named(p, "head", &pooled)
        })
        .collect()
}

/// Overwrites every tensor with fresh uniform values so zero-initialised
/// biases and tables take part in the comparison.
pub fn randomize(p: &mut P, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for (_, t) in p.iter_mut() {
        for v in t.data_mut() {
            *v = r.gen_range(-scale..scale);
        }
    }
}

/// Adds uniform noise to the initialised values (keeps the init scale while
/// making zero biases and tables non-trivial).
pub fn jitter(p: &mut P, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for (_, t) in p.iter_mut() {
        for v in t.data_mut() {
            *v += r.gen_range(-scale..scale);
        }
    }
}

pub fn micro_c3d() -> C3dConfig {
    C3dConfig {
        input: [4, 6, 6],
        conv_channels: vec![2, 3],
        kernel: [3, 3, 3],
        pool_schedule: vec![Some([1, 2, 2]), Some([2, 3, 3])],
        fc_widths: vec![4],
        num_classes: 2,
    }
}

pub fn micro_tsf() -> TsfConfig {
    TsfConfig {
        input: [3, 4, 4],
        patch: 2,
        embed_dim: 8,
        depth: 1,
        heads: 2,
        mlp_ratio: 2,
        num_classes: 2,
    }
}

pub fn micro_swin() -> SwinConfig {
    SwinConfig {
        input: [4, 8, 8],
        patch: [1, 2, 2],
        window: [2, 2, 2],
        embed_dim: 8,
        depths: vec![2, 1],
        heads: vec![1, 2],
        mlp_ratio: 2,
        num_classes: 2,
    }
}
