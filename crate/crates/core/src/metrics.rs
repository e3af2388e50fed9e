//! Confusion counts and the derived evaluation metrics.
//!
//! Ratios with a zero denominator are `None` and serialize as `null`.

use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpusgen::{LabeledPair, NoiseLevel};
use crate::screening::{PipelineKind, ScreenDecision};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{decisions} decisions for {labels} labels")]
    LengthMismatch { decisions: usize, labels: usize },
    #[error("rows come from different corpora ({0} vs {1})")]
    CorpusMismatch(String, String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Counts one `(accept, q)` observation.
    pub fn record(&mut self, accept: bool, q: bool) {
        match (accept, q) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn from_bools(accepts: &[bool], labels: &[bool]) -> Result<Self, MetricsError> {
        if accepts.len() != labels.len() {
            return Err(MetricsError::LengthMismatch {
                decisions: accepts.len(),
                labels: labels.len(),
            });
        }
        let mut cm = Self::default();
        for (&a, &q) in accepts.iter().zip(labels) {
            cm.record(a, q);
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; undefined if either is, or if
    /// both are zero.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }

    /// Φ_f = FN / (TP + FN): the share of qualified pairs rejected.
    pub fn friction(&self) -> Option<f64> {
        ratio(self.fn_, self.tp + self.fn_)
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.total())
    }
}

/// Confusion matrix of aligned decisions and labels.
pub fn confusion(
    decisions: &[ScreenDecision],
    labels: &[LabeledPair],
) -> Result<ConfusionMatrix, MetricsError> {
    let accepts: Vec<bool> = decisions.iter().map(|d| d.accept).collect();
    let qs: Vec<bool> = labels.iter().map(|p| p.q).collect();
    ConfusionMatrix::from_bools(&accepts, &qs)
}

/// Metrics of one pipeline at one threshold on one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub pipeline: PipelineKind,
    pub threshold: f64,
    pub noise_level: NoiseLevel,
    pub corpus_digest: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub friction: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl MetricsRow {
    pub fn new(
        pipeline: PipelineKind,
        threshold: f64,
        noise_level: NoiseLevel,
        corpus_digest: impl Into<String>,
        cm: ConfusionMatrix,
    ) -> Self {
        Self {
            pipeline,
            threshold,
            noise_level,
            corpus_digest: corpus_digest.into(),
            precision: cm.precision(),
            recall: cm.recall(),
            f1: cm.f1(),
            friction: cm.friction(),
            acceptance_rate: cm.acceptance_rate(),
            confusion: cm,
        }
    }

    /// Stable CSV column order.
    pub const CSV_HEADER: [&'static str; 14] = [
        "pipeline",
        "threshold",
        "noise_level",
        "precision",
        "recall",
        "f1",
        "friction",
        "acceptance_rate",
        "tp",
        "fp",
        "tn",
        "fn",
        "total",
        "corpus_digest",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let cm = &self.confusion;
        vec![
            self.pipeline.to_string(),
            fmt_f64(self.threshold),
            self.noise_level.to_string(),
            fmt_opt(self.precision),
            fmt_opt(self.recall),
            fmt_opt(self.f1),
            fmt_opt(self.friction),
            fmt_opt(self.acceptance_rate),
            cm.tp.to_string(),
            cm.fp.to_string(),
            cm.tn.to_string(),
            cm.fn_.to_string(),
            cm.total().to_string(),
            self.corpus_digest.clone(),
        ]
    }
}

/// Shortest round-tripping decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Undefined values print as `NA`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_f64)
}

/// `(new - old) / old`, undefined when `old` is zero or either side is.
pub fn relative_change(old: Option<f64>, new: Option<f64>) -> Option<f64> {
    let (o, n) = (old?, new?);
    (o != 0.0).then(|| (n - o) / o)
}

/// `1 - treatment / baseline`.
pub fn friction_reduction(baseline: Option<f64>, treatment: Option<f64>) -> Option<f64> {
    let (b, t) = (baseline?, treatment?);
    (b != 0.0).then(|| 1.0 - t / b)
}

/// Rounds to `sig` significant figures.
pub fn round_sig(x: f64, sig: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(sig as i32 - 1 - magnitude);
    (x * factor).round() / factor
}

pub fn round_dp(x: f64, places: i32) -> f64 {
    let factor = 10f64.powi(places);
    (x * factor).round() / factor
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: PipelineKind,
    pub treatment: PipelineKind,
    pub precision_change: Option<f64>,
    pub recall_change: Option<f64>,
    pub f1_change: Option<f64>,
    pub friction_change: Option<f64>,
    pub acceptance_rate_change: Option<f64>,
    pub friction_reduction: Option<f64>,
}

/// Relative change of every metric from `baseline` to `treatment`.
pub fn compare(baseline: &MetricsRow, treatment: &MetricsRow) -> Result<Comparison, MetricsError> {
    if baseline.corpus_digest != treatment.corpus_digest {
        return Err(MetricsError::CorpusMismatch(
            baseline.corpus_digest.clone(),
            treatment.corpus_digest.clone(),
        ));
    }
    Ok(Comparison {
        baseline: baseline.pipeline,
        treatment: treatment.pipeline,
        precision_change: relative_change(baseline.precision, treatment.precision),
        recall_change: relative_change(baseline.recall, treatment.recall),
        f1_change: relative_change(baseline.f1, treatment.f1),
        friction_change: relative_change(baseline.friction, treatment.friction),
        acceptance_rate_change: relative_change(
            baseline.acceptance_rate,
            treatment.acceptance_rate,
        ),
        friction_reduction: friction_reduction(baseline.friction, treatment.friction),
    })
}
