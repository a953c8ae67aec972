use serde::{Deserialize, Serialize};

use super::GbdtError;
use crate::exec::Execution;

/// Booster settings. Defaults follow the common LightGBM defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_data_in_leaf: usize,
    pub lambda_l2: f64,
    pub max_bins: usize,
    /// Fraction of features offered to each tree; 1.0 disables sampling.
    pub feature_fraction: f64,
    /// Fraction of rows used by each tree; 1.0 disables sampling.
    pub bagging_fraction: f64,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_trees: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            min_data_in_leaf: 20,
            lambda_l2: 1.0,
            max_bins: 255,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::BadParams(m.to_owned()));
        if self.num_trees == 0 {
            return bad("num_trees must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.min_data_in_leaf == 0 {
            return bad("min_data_in_leaf must be positive");
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return bad("lambda_l2 must be non-negative");
        }
        if !(2..=255).contains(&self.max_bins) {
            return bad("max_bins must lie in [2, 255]");
        }
        for (name, f) in [
            ("feature_fraction", self.feature_fraction),
            ("bagging_fraction", self.bagging_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(GbdtError::BadParams(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}
