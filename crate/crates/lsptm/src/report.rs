//! Cross-validation reports as canonical JSON and as a results table.

use std::fmt::Write;

use lsptm_core::metrics::{f1_score, Metric};
use lsptm_core::models::BackboneKind;
use lsptm_core::train::EvalReport;

use crate::config::canonical_json;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Table,
}

/// One table line.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub model: String,
    pub acc: Metric,
    pub sen: Metric,
    pub pre: Metric,
    pub f1: Metric,
}

impl Row {
    pub fn from_report(r: &EvalReport) -> Self {
        let model = BackboneKind::parse(&r.backbone)
            .map(BackboneKind::display_name)
            .unwrap_or(r.backbone.as_str());
        Self {
            model: model.to_string(),
            acc: r.metrics.acc,
            sen: r.metrics.sen,
            pre: r.metrics.pre,
            f1: r.metrics.f1,
        }
    }

    /// `|f1 − 2·pre·sen/(pre+sen)|`, when all three are defined.
    pub fn f1_gap(&self) -> Option<f64> {
        Some((self.f1.value()? - f1_score(self.pre, self.sen).value()?).abs())
    }
}

fn cell(m: Metric) -> String {
    match m {
        Metric::Defined(v) => format!("{v:.3}"),
        Metric::Undefined => "n/a".into(),
    }
}

pub fn render_table(rows: &[Row]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Invalid("no reports to tabulate".into()));
    }
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max("Model".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}", "Model", "Acc", "Sen", "Pre", "F1");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}",
            r.model,
            cell(r.acc),
            cell(r.sen),
            cell(r.pre),
            cell(r.f1)
        );
    }
    Ok(out)
}

/// Canonical pretty JSON: sorted keys, two-space indent, trailing newline.
pub fn to_json(report: &EvalReport) -> String {
    let value: serde_json::Value = serde_json::from_str(&canonical_json(report)).expect("canonical JSON parses");
    let mut s = serde_json::to_string_pretty(&value).expect("JSON value serializes");
    s.push('\n');
    s
}

/// Parses a stored report and checks it against its own fold matrices.
pub fn from_json(text: &str) -> Result<EvalReport> {
    let report: EvalReport = serde_json::from_str(text).map_err(Error::json("report"))?;
    if report.folds.is_empty() {
        return Err(Error::Invalid("report has no folds".into()));
    }
    if !report.is_consistent() {
        return Err(Error::Invalid(format!(
            "report for `{}` disagrees with its fold matrices",
            report.backbone
        )));
    }
    Ok(report)
}

pub fn emit_report(reports: &[EvalReport], format: Format) -> Result<String> {
    if reports.is_empty() || reports.iter().any(|r| r.folds.is_empty()) {
        return Err(Error::Invalid("cannot emit a report without folds".into()));
    }
    match format {
        Format::Table => render_table(&reports.iter().map(Row::from_report).collect::<Vec<_>>()),
        Format::Json => Ok(reports.iter().map(to_json).collect()),
    }
}
