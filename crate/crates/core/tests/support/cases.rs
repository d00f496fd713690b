//! Randomised oracle comparisons and finite-difference cases, parameterised
//! by seed so the same cases drive unit tests and the acceptance run.

#![allow(dead_code)]

use lsptm_core::graph::GATHER_ZERO;
use lsptm_core::models::videoswin::{patch_merging, shifted_window_msa};
use lsptm_core::models::window::WindowGeom;
use lsptm_core::models::BackboneConfig;
use lsptm_core::params::Bound;
use lsptm_core::{Graph, ModelParams, Tensor, Var};

use super::models::*;
use super::*;

fn pick(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    r.gen_range(lo..=hi)
}

// ---------------------------------------------------------------- oracles

pub fn oracle_matmul(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (m, k, n) = (pick(&mut r, 1, 9), pick(&mut r, 1, 9), pick(&mut r, 1, 9));
    let a = rand_tensor(&mut r, &[m, k], -2.0, 2.0);
    let b = rand_tensor(&mut r, &[k, n], -2.0, 2.0);
    let mut g = Graph::new();
    let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
    let c = g.matmul(va, vb).unwrap();
    max_abs(g.value(c).data(), &matmul_naive(a.data(), b.data(), m, k, n))
}

pub fn oracle_bmm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (bt, m, k, n) = (pick(&mut r, 1, 4), pick(&mut r, 1, 6), pick(&mut r, 1, 6), pick(&mut r, 1, 6));
    let a = rand_tensor(&mut r, &[bt, m, k], -2.0, 2.0);
    let b = rand_tensor(&mut r, &[bt, k, n], -2.0, 2.0);
    let mut g = Graph::new();
    let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
    let c = g.bmm(va, vb).unwrap();
    let mut want = Vec::new();
    for i in 0..bt {
        want.extend(matmul_naive(&a.data()[i * m * k..(i + 1) * m * k], &b.data()[i * k * n..(i + 1) * k * n], m, k, n));
    }
    max_abs(g.value(c).data(), &want)
}

pub fn oracle_conv3d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = pick(&mut r, 1, 2);
    let c = pick(&mut r, 1, 3);
    let o = pick(&mut r, 1, 3);
    let pad = [pick(&mut r, 0, 1), pick(&mut r, 0, 1), pick(&mut r, 0, 1)];
    let ext = [pick(&mut r, 1, 5), pick(&mut r, 1, 6), pick(&mut r, 1, 6)];
    let ker: [usize; 3] = std::array::from_fn(|d| pick(&mut r, 1, 3.min(ext[d] + 2 * pad[d])));
    let stride = [pick(&mut r, 1, 2), pick(&mut r, 1, 2), pick(&mut r, 1, 2)];
    let xs = [n, c, ext[0], ext[1], ext[2]];
    let ws = [o, c, ker[0], ker[1], ker[2]];
    let x = rand_tensor(&mut r, &xs, -1.0, 1.0);
    let w = rand_tensor(&mut r, &ws, -1.0, 1.0);
    let b = rand_tensor(&mut r, &[o], -1.0, 1.0);
    let (want, want_shape) = conv3d_naive(x.data(), xs, w.data(), ws, b.data(), stride, pad);
    let mut g = Graph::new();
    let (vx, vw, vb) = (g.constant(x), g.constant(w), g.constant(b));
    let y = g.conv3d(vx, vw, Some(vb), stride, pad).unwrap();
    assert_eq!(g.shape(y), want_shape, "conv3d shape");
    max_abs(g.value(y).data(), &want)
}

pub fn oracle_max_pool3d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let ext = [pick(&mut r, 1, 5), pick(&mut r, 1, 6), pick(&mut r, 1, 6)];
    let win: [usize; 3] = std::array::from_fn(|d| pick(&mut r, 1, 3.min(ext[d])));
    let stride = [pick(&mut r, 1, 3), pick(&mut r, 1, 3), pick(&mut r, 1, 3)];
    let xs = [pick(&mut r, 1, 2), pick(&mut r, 1, 3), ext[0], ext[1], ext[2]];
    let x = rand_tensor(&mut r, &xs, -1.0, 1.0);
    let (want, want_shape) = maxpool_naive(x.data(), xs, win, stride);
    let mut g = Graph::new();
    let vx = g.constant(x);
    let y = g.max_pool3d(vx, win, stride).unwrap();
    assert_eq!(g.shape(y), want_shape, "max_pool3d shape");
    max_abs(g.value(y).data(), &want)
}

pub fn attention_params(r: &mut ChaCha8Rng, prefix: &str, d: usize, p: &mut ModelParams<f64>) {
    for part in ["q", "k", "v", "proj"] {
        p.insert(format!("{prefix}.{part}.weight"), rand_tensor(r, &[d, d], -0.8, 0.8));
        p.insert(format!("{prefix}.{part}.bias"), rand_tensor(r, &[d], -0.3, 0.3));
    }
}

/// Random window problem: grid extent, configured window, heads and shift.
pub struct WindowCase {
    pub extent: [usize; 3],
    pub window: [usize; 3],
    pub heads: usize,
    pub dim: usize,
    pub shifted: bool,
    pub params: ModelParams<f64>,
    pub grid: Grid,
}

pub fn window_case(seed: u64) -> WindowCase {
    let mut r = rng(seed);
    let extent = [pick(&mut r, 1, 4), pick(&mut r, 1, 5), pick(&mut r, 1, 5)];
    let window = [pick(&mut r, 1, 3), pick(&mut r, 1, 3), pick(&mut r, 1, 3)];
    let heads = pick(&mut r, 1, 2);
    let dim = heads * pick(&mut r, 1, 3);
    let shifted = r.gen_bool(0.6);
    let mut params = ModelParams::new();
    attention_params(&mut r, "attn", dim, &mut params);
    let rows: usize = window.iter().map(|w| 2 * w - 1).product();
    params.insert("attn.rel_pos_bias", rand_tensor(&mut r, &[rows, heads], -1.0, 1.0));
    let cells: usize = extent.iter().product();
    let tokens = (0..cells).map(|_| rand_vec(&mut r, dim, -1.5, 1.5)).collect();
    WindowCase { extent, window, heads, dim, shifted, params, grid: Grid { extent, tokens } }
}

pub fn grid_tensor(grid: &Grid) -> Tensor<f64> {
    let [t, h, w] = grid.extent;
    let d = grid.tokens[0].len();
    Tensor::new(&[1, t, h, w, d], grid.tokens.concat()).unwrap()
}

/// Library window attention output and weights for one case.
pub fn window_msa_lib(case: &WindowCase) -> (Vec<f64>, Tensor<f64>) {
    let geom = WindowGeom::new(case.extent, case.window).unwrap();
    let mut g = Graph::new();
    let bound = case.params.bind_frozen(&mut g);
    let x = g.constant(grid_tensor(&case.grid));
    let msa = shifted_window_msa(&mut g, &bound, "attn", x, &geom, case.heads, case.shifted).unwrap();
    (g.value(msa.out).data().to_vec(), g.value(msa.attn).clone())
}

pub fn oracle_window_msa(seed: u64) -> f64 {
    let case = window_case(seed);
    let (got, _) = window_msa_lib(&case);
    let (want, _) = window_msa_ref(&case.params, "attn", &case.grid, case.window, case.heads, case.shifted);
    max_abs(&got, &want.concat())
}

pub fn oracle_patch_merging(seed: u64) -> f64 {
    let mut r = rng(seed);
    let extent = [pick(&mut r, 1, 3), pick(&mut r, 1, 6), pick(&mut r, 1, 6)];
    let d = pick(&mut r, 1, 4);
    let mut p = ModelParams::new();
    p.insert("merge.norm.weight", rand_tensor(&mut r, &[4 * d], 0.5, 1.5));
    p.insert("merge.norm.bias", rand_tensor(&mut r, &[4 * d], -0.5, 0.5));
    p.insert("merge.reduction.weight", rand_tensor(&mut r, &[4 * d, 2 * d], -1.0, 1.0));
    let cells: usize = extent.iter().product();
    let grid = Grid { extent, tokens: (0..cells).map(|_| rand_vec(&mut r, d, -2.0, 2.0)).collect() };
    let want = patch_merge_ref(&p, "merge", &grid);
    let mut g = Graph::new();
    let bound = p.bind_frozen(&mut g);
    let x = g.constant(grid_tensor(&grid));
    let y = patch_merging(&mut g, &bound, "merge", x).unwrap();
    let [_, t, h, w, _] = *g.shape(y) else { panic!("rank") };
    assert_eq!([t, h, w], want.extent, "patch merging extent");
    max_abs(g.value(y).data(), &want.tokens.concat())
}

pub type OracleCase = (&'static str, fn(u64) -> f64);

pub const ORACLES: [OracleCase; 6] = [
    ("matmul", oracle_matmul),
    ("bmm", oracle_bmm),
    ("conv3d", oracle_conv3d),
    ("max_pool3d", oracle_max_pool3d),
    ("window_msa", oracle_window_msa),
    ("patch_merging", oracle_patch_merging),
];

// ---------------------------------------------------------------- gradients

fn shape_of(r: &mut ChaCha8Rng, rank: usize) -> Vec<usize> {
    (0..rank).map(|_| pick(r, 1, 4)).collect()
}

type Build = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> lsptm_core::Result<Var>>;

/// One finite-difference case per differentiable tape op.
pub fn op_gradchecks(seed: u64) -> Vec<(&'static str, GradCheck)> {
    let mut r = rng(seed);
    let mut cases: Vec<(&'static str, Vec<Tensor<f64>>, Build)> = Vec::new();
    let ws = seed;

    let s = shape_of(&mut r, 3);
    cases.push((
        "add",
        vec![rand_tensor(&mut r, &s, -1.0, 1.0), rand_tensor(&mut r, &s, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.add(v[0], v[1])?;
            weighted_sum(g, y, ws)
        }),
    ));
    cases.push((
        "mul",
        vec![rand_tensor(&mut r, &s, -1.0, 1.0), rand_tensor(&mut r, &s, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.mul(v[0], v[1])?;
            weighted_sum(g, y, ws)
        }),
    ));
    cases.push((
        "scale",
        vec![rand_tensor(&mut r, &s, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.scale(v[0], -1.7);
            weighted_sum(g, y, ws)
        }),
    ));
    let axis = pick(&mut r, 0, 2);
    cases.push((
        "add_bias",
        vec![rand_tensor(&mut r, &s, -1.0, 1.0), rand_tensor(&mut r, &[s[axis]], -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.add_bias(v[0], v[1], axis)?;
            weighted_sum(g, y, ws)
        }),
    ));
    let (m, k, n) = (pick(&mut r, 1, 5), pick(&mut r, 1, 5), pick(&mut r, 1, 5));
    cases.push((
        "matmul",
        vec![rand_tensor(&mut r, &[m, k], -1.0, 1.0), rand_tensor(&mut r, &[k, n], -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.matmul(v[0], v[1])?;
            weighted_sum(g, y, ws)
        }),
    ));
    let bt = pick(&mut r, 1, 3);
    cases.push((
        "bmm",
        vec![rand_tensor(&mut r, &[bt, m, k], -1.0, 1.0), rand_tensor(&mut r, &[bt, k, n], -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.bmm(v[0], v[1])?;
            weighted_sum(g, y, ws)
        }),
    ));
    cases.push((
        "relu",
        vec![rand_tensor(&mut r, &s, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.relu(v[0]);
            weighted_sum(g, y, ws)
        }),
    ));
    cases.push((
        "gelu",
        vec![rand_tensor(&mut r, &s, -2.0, 2.0)],
        Box::new(move |g, v| {
            let y = g.gelu(v[0]);
            weighted_sum(g, y, ws)
        }),
    ));
    let sm_axis = pick(&mut r, 0, 2);
    cases.push((
        "softmax",
        vec![rand_tensor(&mut r, &s, -2.0, 2.0)],
        Box::new(move |g, v| {
            let y = g.softmax(v[0], sm_axis)?;
            weighted_sum(g, y, ws)
        }),
    ));
    let width = pick(&mut r, 2, 6);
    let rows = pick(&mut r, 1, 4);
    cases.push((
        "layer_norm",
        vec![
            rand_tensor(&mut r, &[rows, width], -2.0, 2.0),
            rand_tensor(&mut r, &[width], 0.5, 1.5),
            rand_tensor(&mut r, &[width], -0.5, 0.5),
        ],
        Box::new(move |g, v| {
            let y = g.layer_norm(v[0], width, v[1], v[2], 1e-5)?;
            weighted_sum(g, y, ws)
        }),
    ));
    let (ci, co) = (pick(&mut r, 1, 2), pick(&mut r, 1, 2));
    let ext = [pick(&mut r, 2, 4), pick(&mut r, 2, 4), pick(&mut r, 2, 4)];
    let cpad = [pick(&mut r, 0, 1), pick(&mut r, 0, 1), pick(&mut r, 0, 1)];
    let ker: [usize; 3] = std::array::from_fn(|d| pick(&mut r, 1, 3.min(ext[d] + 2 * cpad[d])));
    let cstride = [pick(&mut r, 1, 2), 1, pick(&mut r, 1, 2)];
    cases.push((
        "conv3d",
        vec![
            rand_tensor(&mut r, &[1, ci, ext[0], ext[1], ext[2]], -1.0, 1.0),
            rand_tensor(&mut r, &[co, ci, ker[0], ker[1], ker[2]], -1.0, 1.0),
            rand_tensor(&mut r, &[co], -1.0, 1.0),
        ],
        Box::new(move |g, v| {
            let y = g.conv3d(v[0], v[1], Some(v[2]), cstride, cpad)?;
            weighted_sum(g, y, ws)
        }),
    ));
    let pwin = [pick(&mut r, 1, 2), 2, 2];
    cases.push((
        "max_pool3d",
        vec![rand_tensor(&mut r, &[1, 2, ext[0], ext[1], ext[2]], -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.max_pool3d(v[0], pwin, [1, 2, 1])?;
            weighted_sum(g, y, ws)
        }),
    ));
    let src = pick(&mut r, 2, 8);
    let out_len = pick(&mut r, 2, 12);
    let index: Vec<usize> = (0..out_len)
        .map(|_| if r.gen_bool(0.15) { GATHER_ZERO } else { r.gen_range(0..src) })
        .collect();
    cases.push((
        "gather",
        vec![rand_tensor(&mut r, &[src], -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.gather(v[0], index.clone(), &[out_len])?;
            weighted_sum(g, y, ws)
        }),
    ));
    let s4 = shape_of(&mut r, 4);
    let total: usize = s4.iter().product();
    cases.push((
        "reshape",
        vec![rand_tensor(&mut r, &s4, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.reshape(v[0], &[total])?;
            weighted_sum(g, y, ws)
        }),
    ));
    let mut axes = vec![0, 1, 2, 3];
    for i in (1..4).rev() {
        let j = r.gen_range(0..=i);
        axes.swap(i, j);
    }
    cases.push((
        "permute",
        vec![rand_tensor(&mut r, &s4, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.permute(v[0], &axes)?;
            weighted_sum(g, y, ws)
        }),
    ));
    let mean_axis = pick(&mut r, 0, 3);
    cases.push((
        "mean_axis",
        vec![rand_tensor(&mut r, &s4, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.mean_axis(v[0], mean_axis)?;
            weighted_sum(g, y, ws)
        }),
    ));
    cases.push((
        "sum",
        vec![rand_tensor(&mut r, &s4, -1.0, 1.0)],
        Box::new(|g, v| Ok(g.sum(v[0]))),
    ));
    let (batch, classes) = (pick(&mut r, 1, 4), pick(&mut r, 2, 4));
    let labels: Vec<usize> = (0..batch).map(|_| r.gen_range(0..classes)).collect();
    cases.push((
        "cross_entropy",
        vec![rand_tensor(&mut r, &[batch, classes], -2.0, 2.0)],
        Box::new(move |g, v| g.cross_entropy(v[0], &labels)),
    ));
    // a composite touching the attention primitives end to end
    let (l, d) = (pick(&mut r, 2, 4), 4);
    cases.push((
        "attention_composite",
        vec![rand_tensor(&mut r, &[1, l, d], -1.0, 1.0), rand_tensor(&mut r, &[d, d], -1.0, 1.0)],
        Box::new(move |g, v| {
            let q = g.reshape(v[0], &[l, d])?;
            let q = g.matmul(q, v[1])?;
            let q = g.reshape(q, &[1, l, d])?;
            let kt = g.permute(v[0], &[0, 2, 1])?;
            let s = g.bmm(q, kt)?;
            let a = g.softmax(s, 2)?;
            let o = g.bmm(a, v[0])?;
            let o = g.gelu(o);
            weighted_sum(g, o, ws)
        }),
    ));

    cases
        .into_iter()
        .map(|(name, inputs, build)| (name, gradcheck(&*build, &inputs, &all_elements)))
        .collect()
}

/// Finite-difference check of a micro backbone's loss with respect to a
/// sample of its parameters and input voxels.
pub fn backbone_gradcheck(config: &BackboneConfig, seed: u64, per_tensor: usize) -> GradCheck {
    backbone_gradcheck_with_step(config, seed, per_tensor, FD_STEP)
}

pub fn backbone_gradcheck_with_step(config: &BackboneConfig, seed: u64, per_tensor: usize, step: f64) -> GradCheck {
    let mut params: ModelParams<f64> = config.init(seed).unwrap();
    jitter(&mut params, seed ^ 0xa5a5, 0.1);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut r = rng(seed ^ 0x5eed);
    let [t, h, w] = config.input();
    let batch = 2;
    let clip = rand_tensor(&mut r, &[batch, 3, t, h, w], -1.0, 1.0);
    let labels: Vec<usize> = (0..batch).map(|_| r.gen_range(0..config.num_classes())).collect();

    let mut inputs: Vec<Tensor<f64>> = names.iter().map(|n| params.get(n).unwrap().clone()).collect();
    inputs.push(clip);
    let picks: Vec<Vec<usize>> = inputs
        .iter()
        .map(|t| {
            let n = t.numel();
            if n <= per_tensor {
                (0..n).collect()
            } else {
                (0..per_tensor).map(|_| r.gen_range(0..n)).collect()
            }
        })
        .collect();
    let cfg = config.clone();
    let build = move |g: &mut Graph<f64>, vars: &[Var]| {
        let bound: Bound = names.iter().cloned().zip(vars.iter().copied()).collect();
        let logits = cfg.forward(g, &bound, *vars.last().unwrap())?;
        g.cross_entropy(logits, &labels)
    };
    gradcheck_with_step(&build, &inputs, &|i, _| picks[i].clone(), step)
}

pub fn micro_backbones() -> [BackboneConfig; 3] {
    [
        BackboneConfig::C3d(micro_c3d()),
        BackboneConfig::Timesformer(micro_tsf()),
        BackboneConfig::Videoswin(micro_swin()),
    ]
}

/// Library forward vs loop composition for one micro backbone.
pub fn backbone_oracle(config: &BackboneConfig, seed: u64) -> f64 {
    let mut params: ModelParams<f64> = config.init(seed).unwrap();
    randomize(&mut params, seed ^ 0x77, 0.5);
    let mut r = rng(seed);
    let [t, h, w] = config.input();
    let clip = rand_tensor(&mut r, &[2, 3, t, h, w], -1.0, 1.0);
    let mut g = Graph::new();
    let bound = params.bind_frozen(&mut g);
    let x = g.constant(clip.clone());
    let y = config.forward(&mut g, &bound, x).unwrap();
    let want = match config {
        BackboneConfig::C3d(c) => c3d_ref(c, &params, &clip),
        BackboneConfig::Timesformer(c) => tsf_ref(c, &params, &clip),
        BackboneConfig::Videoswin(c) => swin_ref(c, &params, &clip),
    };
    max_abs(g.value(y).data(), &want.concat())
}

// ---------------------------------------------------------------- invariants

use lsptm_core::models::timesformer::{spatial_attention, temporal_attention};
use lsptm_core::models::window::{cyclic_shift_3d, window_partition_3d, window_reverse_3d};

/// Worst `|Σ_j a_ij − 1|` over every attention row of the three attention
/// flavours (temporal, spatial, shifted window with masks and padding).
pub fn attention_row_sum_error(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut check = |a: &Tensor<f64>| {
        let l = *a.shape().last().unwrap();
        for row in a.data().chunks(l) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    };
    let (_, attn) = window_msa_lib(&window_case(seed));
    check(&attn);
    let (g, t_attn, s_attn) = divided_attention_pass(seed, None);
    check(g.value(t_attn));
    check(g.value(s_attn));
    worst
}

fn tsf_block_params(seed: u64, d: usize) -> ModelParams<f64> {
    let cfg = lsptm_core::models::TsfConfig { embed_dim: d, ..micro_tsf() };
    let mut p = lsptm_core::models::tsf_init::<f64>(&cfg, seed).unwrap();
    jitter(&mut p, seed, 0.1);
    p
}

pub const DIVIDED_GRID: [usize; 4] = [2, 3, 5, 4];

/// Runs temporal then spatial attention on a random `[N, T, S, D]` grid,
/// optionally adding an impulse at `(n, frame, location, channel)`.
fn divided_attention_pass(seed: u64, impulse: Option<[usize; 4]>) -> (Graph<f64>, Var, Var) {
    let (g, _, _, t, s) = divided_outputs(seed, impulse);
    (g, t, s)
}

fn divided_outputs(seed: u64, impulse: Option<[usize; 4]>) -> (Graph<f64>, Var, Var, Var, Var) {
    let [n, t, s, d] = DIVIDED_GRID;
    let p = tsf_block_params(seed, d);
    let mut r = rng(seed ^ 0x1111);
    let mut x = rand_tensor(&mut r, &[n, t, s, d], -1.0, 1.0);
    if let Some([a, b, c, e]) = impulse {
        x.data_mut()[((a * t + b) * s + c) * d + e] += 0.75;
    }
    let mut g = Graph::new();
    let bound = p.bind_frozen(&mut g);
    let xv = g.constant(x);
    let (yt, at) = temporal_attention(&mut g, &bound, "blocks.0", xv, 2).unwrap();
    let (ys, as_) = spatial_attention(&mut g, &bound, "blocks.0", xv, 2).unwrap();
    (g, yt, ys, at, as_)
}

/// Impulse response of the two divided attentions. Returns the number of
/// output tokens that changed outside the permitted set, for temporal
/// (permitted: same sample and location) and spatial (same sample and frame),
/// plus the number of changed tokens inside each permitted set.
pub fn divided_locality(seed: u64) -> ([usize; 2], [usize; 2]) {
    let [n, t, s, d] = DIVIDED_GRID;
    let mut r = rng(seed ^ 0x2222);
    let imp = [r.gen_range(0..n), r.gen_range(0..t), r.gen_range(0..s), r.gen_range(0..d)];
    let (g0, yt0, ys0, _, _) = divided_outputs(seed, None);
    let (g1, yt1, ys1, _, _) = divided_outputs(seed, Some(imp));
    let mut outside = [0; 2];
    let mut inside = [0; 2];
    for (k, (a, b)) in [(yt0, yt1), (ys0, ys1)].into_iter().enumerate() {
        let (a, b) = (g0.value(a).data(), g1.value(b).data());
        for bn in 0..n {
            for f in 0..t {
                for loc in 0..s {
                    let o = ((bn * t + f) * s + loc) * d;
                    let changed = a[o..o + d] != b[o..o + d];
                    let permitted = bn == imp[0] && if k == 0 { loc == imp[2] } else { f == imp[1] };
                    if changed && !permitted {
                        outside[k] += 1;
                    }
                    if changed && permitted {
                        inside[k] += 1;
                    }
                }
            }
        }
    }
    (outside, inside)
}

/// Largest attention weight on a pair forbidden by the window enumeration
/// (different shifted region, or padding key for a real query), and the
/// number of forbidden pairs inspected.
pub fn masked_attention_mass(seed: u64) -> (f64, usize) {
    let mut case = window_case(seed);
    case.shifted = true;
    let (_, attn) = window_msa_lib(&case);
    let (_, permissions) = window_msa_ref(&case.params, "attn", &case.grid, case.window, case.heads, true);
    let l = *attn.shape().last().unwrap();
    let mut worst: f64 = 0.0;
    let mut forbidden = 0;
    for (win, allowed) in permissions.iter().enumerate() {
        for h in 0..case.heads {
            let block = &attn.data()[(win * case.heads + h) * l * l..(win * case.heads + h + 1) * l * l];
            for q in 0..l {
                let masked: f64 = (0..l).filter(|&k| !allowed[q * l + k]).map(|k| block[q * l + k]).sum();
                forbidden += (0..l).filter(|&k| !allowed[q * l + k]).count();
                worst = worst.max(masked);
            }
        }
    }
    (worst, forbidden)
}

/// Bitwise roundtrips: window partition/reverse on divisible grids, cyclic
/// shift/unshift on arbitrary grids, and the padded shifted gather pair used
/// inside window attention. Returns the number of failed roundtrips.
pub fn roundtrip_failures(seed: u64) -> usize {
    let mut r = rng(seed ^ 0x3333);
    let mut failures = 0;
    let window = [pick(&mut r, 1, 3), pick(&mut r, 1, 3), pick(&mut r, 1, 3)];
    let extent: [usize; 3] = std::array::from_fn(|k| window[k] * pick(&mut r, 1, 3));
    let d = pick(&mut r, 1, 4);
    let batch = pick(&mut r, 1, 2);
    let mut shape = vec![extent[0], extent[1], extent[2], d];
    if batch > 1 {
        shape.insert(0, batch);
    }
    let x = rand_tensor(&mut r, &shape, -1.0, 1.0);
    let w = window_partition_3d(&x, window).unwrap();
    let back = window_reverse_3d(&w, window, extent, batch).unwrap();
    failures += usize::from(back.shape() != x.shape() || back.data() != x.data());

    let offsets = [r.gen_range(-5..=5), r.gen_range(-5..=5), r.gen_range(-5..=5)];
    let shifted = cyclic_shift_3d(&x, offsets).unwrap();
    let unshifted = cyclic_shift_3d(&shifted, offsets.map(|o| -o)).unwrap();
    failures += usize::from(unshifted.data() != x.data());

    let ragged = [pick(&mut r, 1, 5), pick(&mut r, 1, 5), pick(&mut r, 1, 5)];
    let geom = WindowGeom::new(ragged, window).unwrap();
    let y = rand_tensor(&mut r, &[batch, ragged[0], ragged[1], ragged[2], d], -1.0, 1.0);
    for shifted in [false, true] {
        let mut g = Graph::new();
        let v = g.constant(y.clone());
        let (nw, l) = (geom.num_windows(), geom.window_len());
        let win = g.gather(v, geom.partition_gather(batch, d, shifted), &[batch * nw, l, d]).unwrap();
        let rev = g.gather(win, geom.reverse_gather(batch, d, shifted), y.shape()).unwrap();
        failures += usize::from(g.value(rev).data() != y.data());
    }
    failures
}

// ---------------------------------------------------------------- reported figures

/// Published per-backbone `(acc, sen, pre, f1)`.
pub const REPORTED: [(&str, [f64; 4]); 3] = [
    ("C3D", [0.874, 0.942, 0.891, 0.915]),
    ("TimeSformer", [0.885, 0.957, 0.896, 0.924]),
    ("Video-Swin-Transformer", [0.924, 0.956, 0.941, 0.948]),
];

/// `(label, reported, recomputed)` for every F1 entry and the two stated
/// accuracy margins (in percentage points).
pub fn reported_figure_checks() -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for (name, [_, sen, pre, f1]) in REPORTED {
        let got = lsptm_core::metrics::f1_score(
            lsptm_core::metrics::Metric::Defined(pre),
            lsptm_core::metrics::Metric::Defined(sen),
        )
        .value()
        .unwrap();
        out.push((format!("{name} F1"), f1, got));
    }
    let acc = |i: usize| REPORTED[i].1[0];
    out.push(("accuracy margin over C3D".into(), 5.0, ((acc(2) - acc(0)) * 1000.0).round() / 10.0));
    out.push(("accuracy margin over TimeSformer".into(), 3.9, ((acc(2) - acc(1)) * 1000.0).round() / 10.0));
    out
}
