//! Histogram gradient-boosted decision trees for binary classification with
//! logistic loss.
//!
//! Trees grow leaf-wise: each step splits the leaf with the largest gain
//! until `max_leaves` is reached or no split has positive gain. Split search
//! visits features in index order and bins in ascending order and only
//! replaces the incumbent on a strictly larger gain, so ties go to the lowest
//! feature and then the lowest bin threshold. Gradients are computed so that
//! training on flipped labels negates every gradient exactly, which makes the
//! fitted model on `1 - y` the exact mirror of the model on `y`.

mod binning;
mod fit;
mod loss;
mod model;
mod params;
mod tree;

use thiserror::Error;

pub use binning::{bin_features, BinMapper, BinnedMatrix};
pub use fit::{fit_gbdt, fit_gbdt_traced, FitTrace};
pub use loss::{gradient_hessian, logistic_loss, logit_from_counts, sigmoid, PROB_EPS};
pub use model::{predict_proba, GbdtModel};
pub use params::GbdtParams;
pub use tree::{Node, Tree};

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {value} at row {row} is not 0 or 1")]
    LabelOutOfRange { row: usize, value: f64 },
    #[error("{labels} labels for {rows} rows")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("feature width mismatch: model has {expected}, input has {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("cannot parse model text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
