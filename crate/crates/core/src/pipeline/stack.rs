use std::time::{Duration, Instant};

use super::learner::{run_stage, FoldFeatures, LanguageSpec, LanguageWiseLearner, PooledLearner};
use super::{
    ensemble_foldwise, ensemble_predict, fit_ensemble_weights, pseudo_label_iteration,
    EnsembleWeights, FoldAssignment, OofPredictions, PipelineConfig, PipelineError, PseudoConfig,
    PseudoInputs, PseudoStep,
};
use crate::corpus::LanguageTag;
use crate::evalx::f1_score;
use crate::features::FeatureMatrix;

/// Which optional stages run after the pooled stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StackToggles {
    pub language_wise: bool,
    pub pseudo: bool,
    pub ensemble: bool,
}

impl Default for StackToggles {
    fn default() -> Self {
        StackToggles {
            language_wise: true,
            pseudo: true,
            ensemble: true,
        }
    }
}

pub struct StackInputs<'a> {
    pub features: &'a FeatureMatrix,
    pub labels: &'a [f64],
    pub languages: &'a [LanguageTag],
    pub folds: &'a FoldAssignment,
    pub test: Option<(&'a FeatureMatrix, &'a [LanguageTag])>,
}

#[derive(Clone, Debug)]
pub struct StageResult {
    pub name: String,
    pub oof: OofPredictions,
    pub test: Option<Vec<f64>>,
    pub f1: f64,
    pub wall: Duration,
}

#[derive(Clone, Debug)]
pub struct StackOutcome {
    /// In execution order; the last entry is the final producer.
    pub stages: Vec<StageResult>,
    /// Languages that used the pooled model in the language-wise stage.
    pub fallback: Vec<LanguageTag>,
    pub pseudo_trace: Option<Vec<PseudoStep>>,
    /// Stage with the best overall OOF F1; its test predictions seed the
    /// pseudo stage. Each fold picks its own prior from rows outside it.
    pub pseudo_prior: Option<String>,
    /// Weights fit on the full OOF matrix; applied to test predictions.
    pub ensemble_weights: Option<EnsembleWeights>,
}

impl StackOutcome {
    pub fn final_stage(&self) -> &StageResult {
        self.stages.last().expect("the pooled stage always runs")
    }

    pub fn stage(&self, name: &str) -> Option<&StageResult> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: PipelineError,
}

pub const STAGE_POOLED: &str = "pooled";
pub const STAGE_LANGUAGE_WISE: &str = "language_wise";
pub const STAGE_PSEUDO: &str = "pseudo";
pub const STAGE_ENSEMBLE: &str = "ensemble";

/// Runs pooled stacking, then (as toggled) the language-wise, pseudo-label
/// and ensemble stages. The pseudo stage starts from the best earlier stage
/// by OOF F1; the ensemble blends every earlier stage.
pub fn run_stacked(
    inputs: &StackInputs<'_>,
    toggles: StackToggles,
    cfg: &PipelineConfig,
) -> Result<StackOutcome, StageError> {
    let fail = |stage| move |source| StageError { stage, source };
    cfg.validate().map_err(fail(STAGE_POOLED))?;
    let n = inputs.features.n_rows();
    super::learner::check_lengths(n, inputs.labels.len(), inputs.folds.len())
        .map_err(fail(STAGE_POOLED))?;
    if inputs.languages.len() != n {
        return Err(fail(STAGE_POOLED)(PipelineError::LengthMismatch(
            "languages vs rows".into(),
        )));
    }
    if !cfg.nested && (toggles.pseudo || toggles.ensemble) {
        return Err(fail(STAGE_POOLED)(PipelineError::BadConfig(
            "pseudo and ensemble stages need nested fold-wise predictions".into(),
        )));
    }
    let truth: Vec<bool> = inputs.labels.iter().map(|&v| v == 1.0).collect();
    let f1_of = |probs: &[f64]| {
        let pred: Vec<bool> = probs.iter().map(|&p| p >= 0.5).collect();
        f1_score(&truth, &pred, cfg.f1_averaging)
            .map_err(|e| PipelineError::LengthMismatch(e.to_string()))
    };
    let exec = cfg.gbdt.execution;
    let test_x = inputs.test.map(|t| t.0);
    let mut stages: Vec<StageResult> = Vec::new();
    let mut outcome = StackOutcome {
        stages: Vec::new(),
        fallback: Vec::new(),
        pseudo_trace: None,
        pseudo_prior: None,
        ensemble_weights: None,
    };

    let start = Instant::now();
    let pooled = PooledLearner {
        features: FoldFeatures::Shared(inputs.features),
        labels: inputs.labels,
        params: &cfg.gbdt,
        test: test_x,
    };
    let out = run_stage(&pooled, inputs.folds, STAGE_POOLED, cfg.nested, exec)
        .map_err(fail(STAGE_POOLED))?;
    let f1 = f1_of(&out.oof.probs).map_err(fail(STAGE_POOLED))?;
    stages.push(StageResult {
        name: STAGE_POOLED.into(),
        oof: out.oof,
        test: out.test,
        f1,
        wall: start.elapsed(),
    });

    if toggles.language_wise {
        let start = Instant::now();
        let spec = LanguageSpec {
            train: inputs.languages,
            test: inputs.test.map(|t| t.1),
            min_language_samples: cfg.min_language_samples,
        };
        let pooled = PooledLearner {
            features: FoldFeatures::Shared(inputs.features),
            labels: inputs.labels,
            params: &cfg.gbdt,
            test: test_x,
        };
        let learner = LanguageWiseLearner::new(pooled, spec);
        outcome.fallback = learner.fallback_languages();
        let out = run_stage(
            &learner,
            inputs.folds,
            STAGE_LANGUAGE_WISE,
            cfg.nested,
            exec,
        )
        .map_err(fail(STAGE_LANGUAGE_WISE))?;
        let f1 = f1_of(&out.oof.probs).map_err(fail(STAGE_LANGUAGE_WISE))?;
        stages.push(StageResult {
            name: STAGE_LANGUAGE_WISE.into(),
            oof: out.oof,
            test: out.test,
            f1,
            wall: start.elapsed(),
        });
    }

    if toggles.pseudo {
        let start = Instant::now();
        let prior_global = stages
            .iter()
            .fold(&stages[0], |best, s| if s.f1 > best.f1 { s } else { best });
        let members: Vec<&OofPredictions> = stages.iter().map(|s| &s.oof).collect();
        let prior =
            select_per_fold(&members, &truth, cfg.f1_averaging).map_err(fail(STAGE_PSEUDO))?;
        let pseudo_inputs = PseudoInputs {
            base: inputs.features,
            base_test: test_x,
            labels: inputs.labels,
            folds: inputs.folds,
            params: &cfg.gbdt,
            languages: toggles.language_wise.then_some(LanguageSpec {
                train: inputs.languages,
                test: inputs.test.map(|t| t.1),
                min_language_samples: cfg.min_language_samples,
            }),
        };
        let pcfg = PseudoConfig {
            epsilon: cfg.pseudo_epsilon,
            max_iters: cfg.pseudo_max_iters,
            mode: cfg.pseudo_mode,
            averaging: cfg.f1_averaging,
        };
        let out =
            pseudo_label_iteration(&pseudo_inputs, &prior, prior_global.test.as_deref(), &pcfg)
                .map_err(fail(STAGE_PSEUDO))?;
        outcome.pseudo_prior = Some(prior_global.name.clone());
        let f1 = out.trace[out.best_iteration].f1;
        let mut oof = out.best;
        oof.producer = STAGE_PSEUDO.into();
        outcome.pseudo_trace = Some(out.trace);
        stages.push(StageResult {
            name: STAGE_PSEUDO.into(),
            oof,
            test: out.best_test,
            f1,
            wall: start.elapsed(),
        });
    }

    if toggles.ensemble {
        let start = Instant::now();
        let members: Vec<&OofPredictions> = stages.iter().map(|s| &s.oof).collect();
        let (oof, _) = ensemble_foldwise(
            &members,
            &truth,
            cfg.ensemble_grid_step,
            cfg.f1_averaging,
            STAGE_ENSEMBLE,
        )
        .map_err(fail(STAGE_ENSEMBLE))?;
        let weights =
            fit_ensemble_weights(&members, &truth, cfg.ensemble_grid_step, cfg.f1_averaging)
                .map_err(fail(STAGE_ENSEMBLE))?;
        let test = match stages
            .iter()
            .map(|s| s.test.as_deref().map(|t| (s.name.as_str(), t)))
            .collect::<Option<Vec<_>>>()
        {
            Some(preds) if inputs.test.is_some() => {
                Some(ensemble_predict(&weights, &preds).map_err(fail(STAGE_ENSEMBLE))?)
            }
            _ => None,
        };
        let f1 = f1_of(&oof.probs).map_err(fail(STAGE_ENSEMBLE))?;
        outcome.ensemble_weights = Some(weights);
        stages.push(StageResult {
            name: STAGE_ENSEMBLE.into(),
            oof,
            test,
            f1,
            wall: start.elapsed(),
        });
    }
    outcome.stages = stages;
    Ok(outcome)
}

/// For each outer fold `j`, the candidate whose fold-`j` vector scores the
/// best F1 on rows outside `j` (earliest on ties), stitched into one
/// prediction set.
fn select_per_fold(
    candidates: &[&OofPredictions],
    y: &[bool],
    averaging: crate::evalx::Averaging,
) -> Result<OofPredictions, PipelineError> {
    let folds = &candidates[0].folds;
    let mut probs = vec![0.0; y.len()];
    let mut foldwise = Vec::with_capacity(folds.k());
    for j in 0..folds.k() {
        let rows = folds.rows_outside(j);
        let truth: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
        let mut best: Option<(f64, &Vec<f64>)> = None;
        for c in candidates {
            let fw = &c
                .foldwise
                .as_ref()
                .ok_or_else(|| PipelineError::MissingFoldwise(c.producer.clone()))?[j];
            let pred: Vec<bool> = rows.iter().map(|&r| fw[r] >= 0.5).collect();
            let f1 = f1_score(&truth, &pred, averaging)
                .map_err(|e| PipelineError::LengthMismatch(e.to_string()))?;
            if best.is_none_or(|b| f1 > b.0) {
                best = Some((f1, fw));
            }
        }
        let fw = best.expect("at least one candidate").1;
        for r in folds.rows_in(j) {
            probs[r] = fw[r];
        }
        foldwise.push(fw.clone());
    }
    Ok(OofPredictions {
        producer: "prior".into(),
        probs,
        folds: folds.clone(),
        foldwise: Some(foldwise),
    })
}
