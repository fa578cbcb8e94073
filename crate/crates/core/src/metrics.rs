//! Frobenius loss, PRIAL and per-grid-point aggregation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimatorId;

/// `‖estimate − truth_inv‖²_F`
pub fn frobenius_loss(estimate: &DMatrix<f64>, truth_inv: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth_inv.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth_inv.nrows(),
            found: estimate.nrows(),
        });
    }
    Ok(estimate
        .iter()
        .zip(truth_inv.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Percentage relative improvement in average loss over the baseline.
pub fn prial(mean_loss_estimator: f64, mean_loss_baseline: f64) -> Result<f64> {
    if !(mean_loss_baseline > 0.0 && mean_loss_baseline.is_finite()) {
        return Err(Error::UndefinedPrial(mean_loss_baseline));
    }
    Ok((1.0 - mean_loss_estimator / mean_loss_baseline) * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    /// Not evaluated at all, e.g. a plain-inverse estimator when `p > n`.
    Skipped(String),
    /// Evaluated but failed in at least one replication.
    Failed(String),
}

impl EntryStatus {
    pub fn label(&self) -> String {
        match self {
            EntryStatus::Ok => "ok".into(),
            EntryStatus::Skipped(reason) => format!("skipped: {reason}"),
            EntryStatus::Failed(reason) => format!("failed: {reason}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, EntryStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrialEntry {
    pub estimator: EstimatorId,
    /// Target label for estimators that shrink toward one.
    pub target: Option<String>,
    pub mean_loss: f64,
    pub prial_percent: f64,
    pub mean_alpha: Option<f64>,
    pub mean_beta: Option<f64>,
    pub replications: usize,
    pub status: EntryStatus,
}

/// Results for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrialReport {
    pub p: usize,
    pub n: usize,
    pub c: f64,
    pub baseline: EstimatorId,
    pub baseline_mean_loss: f64,
    pub entries: Vec<PrialEntry>,
}

impl PrialReport {
    pub fn entry(&self, estimator: EstimatorId, target: Option<&str>) -> Option<&PrialEntry> {
        self.entries
            .iter()
            .find(|e| e.estimator == estimator && e.target.as_deref() == target)
    }
}

/// Per-replication samples of one estimator, in replication order.
#[derive(Debug, Clone, Default)]
pub struct LossSamples {
    pub losses: Vec<f64>,
    pub weights: Vec<(f64, f64)>,
}

impl LossSamples {
    pub fn push(&mut self, loss: f64, weights: Option<(f64, f64)>) {
        self.losses.push(loss);
        if let Some(w) = weights {
            self.weights.push(w);
        }
    }
}

/// Arithmetic mean accumulated left to right; `NaN` when empty.
pub fn ordered_mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let count = values.len();
    if count == 0 {
        return f64::NAN;
    }
    values.fold(0.0, |acc, v| acc + v) / count as f64
}

/// Mean loss and mean intensities of one estimator, summed in replication
/// order so the result does not depend on how the samples were produced.
pub fn summarize(
    estimator: EstimatorId,
    target: Option<String>,
    samples: &LossSamples,
    baseline_mean_loss: f64,
) -> PrialEntry {
    let mean_loss = ordered_mean(samples.losses.iter().copied());
    let (mean_alpha, mean_beta) = if samples.weights.is_empty() {
        (None, None)
    } else {
        (
            Some(ordered_mean(samples.weights.iter().map(|w| w.0))),
            Some(ordered_mean(samples.weights.iter().map(|w| w.1))),
        )
    };
    let (prial_percent, status) = match prial(mean_loss, baseline_mean_loss) {
        Ok(v) => (v, EntryStatus::Ok),
        Err(e) => (f64::NAN, EntryStatus::Failed(e.to_string())),
    };
    PrialEntry {
        estimator,
        target,
        mean_loss,
        prial_percent,
        mean_alpha,
        mean_beta,
        replications: samples.losses.len(),
        status,
    }
}
