//! Staged training: stratified folds, out-of-fold stacking (pooled and per
//! language), pseudo-label iterations and weighted ensembling.
//!
//! Every stage can produce *fold-wise* predictions in addition to its
//! out-of-fold (OOF) vector: for each outer fold `j`, a full-length vector
//! whose entries were computed without any label from fold `j`. Rows inside
//! fold `j` carry the ordinary OOF value; rows outside it come from inner
//! models trained on the data minus folds `j` and `m`. Downstream stages fit
//! their fold-`j` models on fold-`j` vectors only, so no label of fold `j`
//! ever reaches a fold-`j` prediction, however many stages are stacked.

mod ensemble;
mod folds;
mod learner;
mod pseudo;
mod stack;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::evalx::Averaging;
use crate::features::FeatureError;
use crate::gbdt::{GbdtError, GbdtParams};

pub use ensemble::{ensemble_foldwise, ensemble_predict, fit_ensemble_weights, EnsembleWeights};
pub use folds::{make_folds, make_folds_from, FoldAssignment};
pub use learner::{
    run_stage, train_oof, train_oof_language_wise, FoldFeatures, FoldLearner, LanguageSpec,
    LanguageWiseLearner, LanguageWiseModel, OofPredictions, PooledLearner, StageOutput,
};
pub use pseudo::{
    pseudo_label_iteration, PseudoConfig, PseudoInputs, PseudoMode, PseudoOutcome, PseudoStep,
};
pub use stack::{
    run_stacked, StackInputs, StackOutcome, StackToggles, StageError, StageResult, STAGE_ENSEMBLE,
    STAGE_LANGUAGE_WISE, STAGE_POOLED, STAGE_PSEUDO,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("k = {k} folds is invalid for {n} records")]
    BadK { k: usize, n: usize },
    #[error("training complement of fold {0} is empty")]
    FoldTooSmall(usize),
    #[error("no models to ensemble")]
    NoModels,
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("fold-wise predictions are required for {0}")]
    MissingFoldwise(String),
    #[error("invalid pipeline setting: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Stage-level settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    pub min_language_samples: usize,
    pub pseudo_max_iters: usize,
    pub pseudo_epsilon: f64,
    pub pseudo_mode: PseudoMode,
    pub ensemble_grid_step: f64,
    pub f1_averaging: Averaging,
    /// Compute fold-wise predictions so stacked stages stay leakage-free.
    pub nested: bool,
    pub gbdt: GbdtParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 10,
            min_language_samples: 50,
            pseudo_max_iters: 3,
            pseudo_epsilon: 1e-4,
            pseudo_mode: PseudoMode::Soft,
            ensemble_grid_step: 0.05,
            f1_averaging: Averaging::Positive,
            nested: true,
            gbdt: GbdtParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k < 2 {
            return Err(PipelineError::BadConfig("k must be at least 2".into()));
        }
        // written so that NaN fails too
        let positive = |v: f64| v > 0.0;
        if !positive(self.pseudo_epsilon)
            || !positive(self.ensemble_grid_step)
            || self.ensemble_grid_step > 1.0
        {
            return Err(PipelineError::BadConfig(
                "pseudo_epsilon and ensemble_grid_step must be positive".into(),
            ));
        }
        self.gbdt.validate()?;
        Ok(())
    }
}
