//! Benchmark harness: mean relative error, the three-method comparison over
//! SNR conditions and CSV/JSON artifact export.

mod compare;
mod export;
mod mre;

pub use compare::{
    evaluate_threshold, run_comparison, ComparisonConfig, ComparisonRow, ComparisonTable, Method, MethodRun, Provenance,
    ThresholdSweep, REFERENCE_MRE,
};
pub use export::{
    export_artifacts, RunMeta, COMPARISON_FILE, LOSS_CURVES_FILE, PRED_VS_TRUE_FILE, RUN_META_FILE,
};
pub use mre::mean_relative_error;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{predicted} predictions for {truth} truths; need equal non-zero lengths")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("truth value {value} at index {index} is not positive")]
    NonPositiveTruth { index: usize, value: f64 },
    #[error("invalid comparison config: {0}")]
    InvalidConfig(String),
    #[error("i/o failure at {path}: {message}")]
    Io { path: String, message: String },
}

/// Accuracy of one method on one test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MreReport {
    pub method: String,
    pub snr_db: f64,
    pub seed: u64,
    pub mre_percent: f64,
    /// `(predicted_D, true_D)` per test sample, meters.
    pub pairs: Vec<(f64, f64)>,
}

impl MreReport {
    pub fn new(method: impl Into<String>, snr_db: f64, seed: u64, pairs: Vec<(f64, f64)>) -> Result<Self, BenchError> {
        let mut report = Self {
            method: method.into(),
            snr_db,
            seed,
            mre_percent: 0.0,
            pairs,
        };
        report.mre_percent = report.recompute()?;
        Ok(report)
    }

    /// Mean relative error recomputed from the stored pairs.
    pub fn recompute(&self) -> Result<f64, BenchError> {
        let (pred, truth): (Vec<f64>, Vec<f64>) = self.pairs.iter().copied().unzip();
        mean_relative_error(&pred, &truth)
    }
}
