//! Binary confusion matrices and the Acc/Sen/Pre/F1 metric family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts against a configurable positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix2 {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix2 {
    /// Tallies `predictions` against `labels` (both class indices 0/1).
    pub fn from_predictions(predictions: &[usize], labels: &[usize], positive: usize) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut cm = Self::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            cm.record(p == positive, l == positive);
        }
        Ok(cm)
    }

    pub fn record(&mut self, predicted_positive: bool, actually_positive: bool) {
        match (predicted_positive, actually_positive) {
            (true, true) => self.tp += 1,
            (false, true) => self.fn_ += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fn_: self.fn_ + other.fn_,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
        }
    }
}

impl core::iter::Sum for ConfusionMatrix2 {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a.merge(&b))
    }
}

/// A ratio that may be undefined (zero denominator). Serializes as a
/// number or `null`, never as a silent zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metric {
    Defined(f64),
    Undefined,
}

impl Metric {
    pub fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Metric::Undefined
        } else {
            Metric::Defined(num / den)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Defined(v) => Some(v),
            Metric::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Metric::Defined(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: Metric,
    pub sen: Metric,
    pub pre: Metric,
    pub f1: Metric,
}

/// Harmonic mean of precision and sensitivity.
pub fn f1_score(pre: Metric, sen: Metric) -> Metric {
    match (pre, sen) {
        (Metric::Defined(p), Metric::Defined(s)) => Metric::ratio(2.0 * p * s, p + s),
        _ => Metric::Undefined,
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix2) -> Metrics {
    let (tp, fn_, fp, tn) = (cm.tp as f64, cm.fn_ as f64, cm.fp as f64, cm.tn as f64);
    let acc = Metric::ratio(tp + tn, tp + fn_ + fp + tn);
    let sen = Metric::ratio(tp, tp + fn_);
    let pre = Metric::ratio(tp, tp + fp);
    Metrics {
        acc,
        sen,
        pre,
        f1: f1_score(pre, sen),
    }
}
