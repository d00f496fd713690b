//! Fine-tuning loop, evaluation and per-fold cross-validation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::{Clip, NormStats};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{compute_metrics, ConfusionMatrix2, Metrics};
use crate::models::{BackboneConfig, BackboneKind, C3dConfig, SwinConfig, TsfConfig};
use crate::optim::{Optimizer, OptimizerKind, OptimizerSettings};
use crate::params::ModelParams;
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    #[default]
    Scratch,
    Checkpoint(String),
}

fn default_momentum() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitSource,
}

impl TrainConfig {
    /// SGD with momentum at 1e-2 for C3D, AdamW at 3e-4 for the transformers.
    pub fn defaults_for(kind: BackboneKind) -> Self {
        match kind {
            BackboneKind::C3d => Self {
                optimizer: OptimizerKind::SgdMomentum,
                lr: 1e-2,
                weight_decay: 5e-4,
                momentum: 0.9,
                epochs: 10,
                batch_size: 4,
                seed: 0,
                init: InitSource::Scratch,
            },
            BackboneKind::Timesformer | BackboneKind::Videoswin => Self {
                optimizer: OptimizerKind::Adamw,
                lr: 3e-4,
                weight_decay: 0.05,
                momentum: 0.9,
                epochs: 10,
                batch_size: 4,
                seed: 0,
                init: InitSource::Scratch,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        if self.weight_decay < 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("weight_decay ≥ 0 and momentum in [0, 1) required".into()));
        }
        Ok(())
    }

    fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            kind: self.optimizer,
            lr: self.lr,
            weight_decay: self.weight_decay,
            momentum: self.momentum,
        }
    }
}

fn default_stride() -> usize {
    2
}

fn default_flip() -> f64 {
    0.5
}

fn default_positive() -> usize {
    1
}

/// Everything that determines a training or cross-validation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: BackboneConfig,
    pub train: TrainConfig,
    #[serde(default = "default_stride")]
    pub sampling_stride: usize,
    /// Clip-level horizontal flip probability for training views.
    #[serde(default = "default_flip")]
    pub flip_probability: f64,
    #[serde(default)]
    pub norm: NormStats,
    /// Class index treated as "positive" in confusion matrices.
    #[serde(default = "default_positive")]
    pub positive_class: usize,
}

impl ExperimentConfig {
    pub fn defaults_for(kind: BackboneKind) -> Self {
        Self {
            model: kind.toy(),
            train: TrainConfig::defaults_for(kind),
            sampling_stride: 2,
            flip_probability: 0.5,
            norm: NormStats::default(),
            positive_class: 1,
        }
    }

    pub fn full_scale(kind: BackboneKind) -> Self {
        let model = match kind {
            BackboneKind::C3d => BackboneConfig::C3d(C3dConfig::full_scale()),
            BackboneKind::Timesformer => BackboneConfig::Timesformer(TsfConfig::full_scale()),
            BackboneKind::Videoswin => BackboneConfig::Videoswin(SwinConfig::full_scale()),
        };
        Self {
            model,
            ..Self::defaults_for(kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.sampling_stride == 0 {
            return Err(Error::InvalidArgument("sampling_stride must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidArgument(format!("flip probability {}", self.flip_probability)));
        }
        if self.positive_class >= self.model.num_classes() {
            return Err(Error::InvalidArgument(format!("positive class {}", self.positive_class)));
        }
        Ok(())
    }
}

/// Stacks `[3×T×H×W]` clips into a `[B×3×T×H×W]` batch.
pub fn stack_clips<'a>(clips: impl IntoIterator<Item = &'a Clip>) -> Result<Tensor<f32>> {
    let mut data = Vec::new();
    let mut shape: Option<Vec<usize>> = None;
    let mut count = 0;
    for c in clips {
        match &shape {
            None => shape = Some(c.data.shape().to_vec()),
            Some(s) if s.as_slice() != c.data.shape() => {
                return Err(Error::DimensionMismatch {
                    op: "stack_clips",
                    lhs: s.clone(),
                    rhs: c.data.shape().to_vec(),
                })
            }
            Some(_) => {}
        }
        data.extend_from_slice(c.data.data());
        count += 1;
    }
    let mut full = alloc::vec![count];
    full.extend(shape.ok_or_else(|| Error::InvalidArgument("empty batch".into()))?);
    Tensor::new(&full, data)
}

/// Anything that maps a clip batch to class logits.
pub trait Predictor {
    fn logits(&self, batch: &Tensor<f32>) -> Result<Tensor<f32>>;
}

/// A backbone configuration paired with its parameters.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub config: BackboneConfig,
    pub params: ModelParams<f32>,
}

impl Predictor for TrainedModel {
    fn logits(&self, batch: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = Graph::new();
        let bound = self.params.bind_frozen(&mut g);
        let x = g.constant(batch.clone());
        let out = self.config.forward(&mut g, &bound, x)?;
        Ok(g.value(out).clone())
    }
}

/// Argmax over each logit row; ties go to the lower class index.
pub fn argmax_rows(logits: &Tensor<f32>) -> Vec<usize> {
    let classes = logits.shape()[1];
    logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn predict<P: Predictor + ?Sized>(model: &P, clips: &[&Clip], batch_size: usize) -> Result<Vec<usize>> {
    let mut preds = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(batch_size.max(1)) {
        let batch = stack_clips(chunk.iter().copied())?;
        preds.extend(argmax_rows(&model.logits(&batch)?));
    }
    Ok(preds)
}

/// Confusion matrix of `model` over `clips`, counted against `positive`.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, clips: &[&Clip], positive: usize) -> Result<ConfusionMatrix2> {
    let preds = predict(model, clips, 8)?;
    let labels: Vec<usize> = clips.iter().map(|c| c.label).collect();
    ConfusionMatrix2::from_predictions(&preds, &labels, positive)
}

pub struct FitOutcome {
    pub params: ModelParams<f32>,
    /// Mean training loss per epoch.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch training with a seeded per-epoch shuffle. Identical inputs give
/// bit-identical parameters.
pub fn fit(
    clips: &[&Clip],
    model: &BackboneConfig,
    config: &TrainConfig,
    initial: ModelParams<f32>,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<FitOutcome> {
    config.validate()?;
    for class in 0..model.num_classes() {
        if !clips.iter().any(|c| c.label == class) {
            return Err(Error::InvalidArgument(format!("no training clip with label {class}")));
        }
    }
    let mut params = initial;
    let mut opt = Optimizer::new(config.optimizer_settings());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..clips.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = stack_clips(chunk.iter().map(|&i| clips[i]))?;
            let labels: Vec<usize> = chunk.iter().map(|&i| clips[i].label).collect();
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let x = g.constant(batch);
            let logits = model.forward(&mut g, &bound, x)?;
            let loss = g.cross_entropy(logits, &labels)?;
            let value = g.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            g.backward(loss)?;
            let grads = bound.grads(&g);
            if grads.values().any(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(Error::Diverged { epoch, batch: b });
            }
            opt.step(&mut params, &grads);
            if !params.all_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            total += value as f64 * chunk.len() as f64;
        }
        let mean = total / clips.len() as f64;
        on_epoch(epoch, mean);
        trace.push(mean);
    }
    Ok(FitOutcome {
        params,
        loss_trace: trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub matrix: ConfusionMatrix2,
    pub metrics: Metrics,
    pub loss_trace: Vec<f64>,
}

/// Cross-validation summary: per-fold matrices, their pooled sum, and
/// metrics computed on the pooled matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backbone: String,
    pub config_digest: String,
    pub positive_class: usize,
    pub folds: Vec<FoldReport>,
    pub pooled: ConfusionMatrix2,
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn from_folds(
        backbone: BackboneKind,
        config_digest: String,
        positive_class: usize,
        mut folds: Vec<FoldReport>,
    ) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::InvalidArgument("report needs at least one fold".into()));
        }
        folds.sort_by_key(|f| f.fold);
        let pooled: ConfusionMatrix2 = folds.iter().map(|f| f.matrix).sum();
        Ok(Self {
            backbone: backbone.id().into(),
            config_digest,
            positive_class,
            folds,
            pooled,
            metrics: compute_metrics(&pooled),
        })
    }

    /// Re-derives pooled counts and every metric from stored matrices.
    pub fn is_consistent(&self) -> bool {
        let pooled: ConfusionMatrix2 = self.folds.iter().map(|f| f.matrix).sum();
        pooled == self.pooled
            && compute_metrics(&pooled) == self.metrics
            && self.folds.iter().all(|f| compute_metrics(&f.matrix) == f.metrics)
    }
}

/// Trains on every fold but `held_out` and evaluates on it. The fold's
/// seed is `train.seed + held_out`; `train_view` and `eval_view` are the
/// same clips prepared for training (random window, flips) and evaluation.
pub fn run_fold(
    held_out: usize,
    folds: &[Vec<usize>],
    train_view: &[Clip],
    eval_view: &[Clip],
    exp: &ExperimentConfig,
    pretrained: Option<&ModelParams<f32>>,
) -> Result<FoldReport> {
    let train_idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != held_out)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    let train: Vec<&Clip> = train_idx.iter().map(|&i| &train_view[i]).collect();
    let test: Vec<&Clip> = folds[held_out].iter().map(|&i| &eval_view[i]).collect();
    let mut cfg = exp.train.clone();
    cfg.seed = exp.train.seed.wrapping_add(held_out as u64);
    let initial = match pretrained {
        Some(p) => p.clone(),
        None => exp.model.init(cfg.seed)?,
    };
    let outcome = fit(&train, &exp.model, &cfg, initial, |_, _| {})?;
    let model = TrainedModel {
        config: exp.model.clone(),
        params: outcome.params,
    };
    let matrix = evaluate(&model, &test, exp.positive_class)?;
    Ok(FoldReport {
        fold: held_out,
        matrix,
        metrics: compute_metrics(&matrix),
        loss_trace: outcome.loss_trace,
    })
}
