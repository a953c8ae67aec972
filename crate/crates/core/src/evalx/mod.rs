//! Metrics, per-language decision thresholds, label-noise probes and
//! scatter export.

mod metrics;
mod noise;
mod scatter;
mod thresholds;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::features::FeatureError;
use crate::gbdt::GbdtError;

pub use metrics::{f1_score, Averaging, MetricReport};
pub use noise::{flip_labels, noise_probe, NoiseReport};
pub use scatter::{pca_scatter_export, scatter_text};
pub use thresholds::{apply_thresholds, tune_thresholds, ThresholdMap};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
}

pub(crate) fn check_len(a: usize, b: usize, what: &str) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Grid `{0, step, 2 step, ..., 1}` built from integer multiples so that
/// 0.5 is hit exactly whenever `1 / step` is even.
pub fn unit_grid(step: f64) -> Result<Vec<f64>, EvalError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(EvalError::BadArgument(format!(
            "grid step {step} outside (0, 1]"
        )));
    }
    let steps = (1.0 / step).round().max(1.0) as usize;
    Ok((0..=steps).map(|i| i as f64 / steps as f64).collect())
}
