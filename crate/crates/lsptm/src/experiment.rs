//! Cross-validation, training and evaluation over manifests on disk.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use lsptm_core::baseline::FrameMeanBaseline;
use lsptm_core::clip::{Augment, Clip, Placement, SamplingPolicy, ShortVideoMode};
use lsptm_core::kfold::{folds_from_assignment, stratified_kfold};
use lsptm_core::metrics::{compute_metrics, ConfusionMatrix2};
use lsptm_core::train::{
    evaluate, fit, run_fold, EvalReport, ExperimentConfig, FitOutcome, FoldReport, InitSource, TrainedModel,
};
use lsptm_core::ModelParams;

use crate::checkpoint::load_checkpoint;
use crate::config::config_digest;
use crate::error::{Error, Result};
use crate::frames::load_clip;
use crate::manifest::Manifest;

/// SplitMix64 step, used to derive independent per-clip seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn policy(exp: &ExperimentConfig, placement: Placement) -> SamplingPolicy {
    SamplingPolicy {
        count: exp.model.input()[0],
        stride: exp.sampling_stride,
        placement,
        short_video_mode: ShortVideoMode::Loop,
    }
}

/// Every manifest clip, loaded either as an evaluation view (centred window,
/// no flip) or, with `train_seed`, as a training view (random window and a
/// clip-level flip).
pub fn load_view(manifest: &Manifest, exp: &ExperimentConfig, train_seed: Option<u64>) -> Result<Vec<Clip>> {
    let [_, h, w] = exp.model.input();
    manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (placement, augment) = match train_seed {
                None => (Placement::Center, Augment::None),
                Some(seed) => (
                    Placement::Random {
                        seed: derive_seed(seed, 2 * i as u64),
                    },
                    Augment::Hflip {
                        p: exp.flip_probability,
                        seed: derive_seed(seed, 2 * i as u64 + 1),
                    },
                ),
            };
            load_clip(
                &manifest.source(e),
                &policy(exp, placement),
                &augment,
                (h, w),
                &exp.norm,
                e.binary_label as usize,
                &e.id,
            )
        })
        .collect()
}

/// Fixed folds from the manifest when every entry has one, else stratified.
pub fn make_folds(manifest: &Manifest, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    match manifest.fixed_folds() {
        Some(assignment) => {
            let folds = folds_from_assignment(&assignment)?;
            if folds.len() != k {
                return Err(Error::Invalid(format!(
                    "manifest assigns {} folds but k = {k}",
                    folds.len()
                )));
            }
            Ok(folds)
        }
        None => Ok(stratified_kfold(&manifest.binary_labels(), k, seed)?),
    }
}

pub fn pretrained(exp: &ExperimentConfig) -> Result<Option<ModelParams<f32>>> {
    match &exp.train.init {
        InitSource::Scratch => Ok(None),
        InitSource::Checkpoint(path) => {
            let ckpt = load_checkpoint(path.as_ref(), Some(exp.model.kind()))?;
            Ok(Some(ckpt.params))
        }
    }
}

/// Runs `task(0..n)` on up to `jobs` threads; results come back in index order.
fn parallel_map<R: Send>(n: usize, jobs: usize, task: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..n).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = task(i);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect()
}

/// Trains and evaluates each of the `k` folds; the pooled matrix and metrics
/// cover the whole manifest. `jobs` only affects wall time.
pub fn run_crossval(manifest: &Manifest, exp: &ExperimentConfig, k: usize, jobs: usize) -> Result<EvalReport> {
    exp.validate()?;
    let folds = make_folds(manifest, k, exp.train.seed)?;
    let train_view = load_view(manifest, exp, Some(exp.train.seed))?;
    let eval_view = load_view(manifest, exp, None)?;
    let init = pretrained(exp)?;
    let reports: Vec<FoldReport> = parallel_map(folds.len(), jobs, |f| {
        Ok(run_fold(f, &folds, &train_view, &eval_view, exp, init.as_ref())?)
    })?;
    Ok(EvalReport::from_folds(
        exp.model.kind(),
        config_digest(exp),
        exp.positive_class,
        reports,
    )?)
}

/// Pooled confusion matrix of the frame-mean colour baseline over `folds`.
pub fn baseline_crossval(folds: &[Vec<usize>], train_view: &[Clip], eval_view: &[Clip], positive: usize) -> Result<ConfusionMatrix2> {
    let mut pooled = ConfusionMatrix2::default();
    for (f, held_out) in folds.iter().enumerate() {
        let train: Vec<&Clip> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().map(|&i| &train_view[i]))
            .collect();
        let model = FrameMeanBaseline::fit(&train)?;
        for &i in held_out {
            let clip = &eval_view[i];
            pooled.record(model.predict(clip) == positive, clip.label == positive);
        }
    }
    Ok(pooled)
}

/// Fits one model on every manifest clip.
pub fn train(manifest: &Manifest, exp: &ExperimentConfig, on_epoch: impl FnMut(usize, f64)) -> Result<FitOutcome> {
    exp.validate()?;
    let view = load_view(manifest, exp, Some(exp.train.seed))?;
    let clips: Vec<&Clip> = view.iter().collect();
    let initial = match pretrained(exp)? {
        Some(p) => p,
        None => exp.model.init(exp.train.seed)?,
    };
    Ok(fit(&clips, &exp.model, &exp.train, initial, on_epoch)?)
}

/// Scores a trained model on every manifest clip, as a one-fold report.
pub fn evaluate_manifest(manifest: &Manifest, exp: &ExperimentConfig, params: ModelParams<f32>) -> Result<EvalReport> {
    let view = load_view(manifest, exp, None)?;
    let clips: Vec<&Clip> = view.iter().collect();
    let model = TrainedModel {
        config: exp.model.clone(),
        params,
    };
    let matrix = evaluate(&model, &clips, exp.positive_class)?;
    let fold = FoldReport {
        fold: 0,
        matrix,
        metrics: compute_metrics(&matrix),
        loss_trace: Vec::new(),
    };
    Ok(EvalReport::from_folds(
        exp.model.kind(),
        config_digest(exp),
        exp.positive_class,
        vec![fold],
    )?)
}
