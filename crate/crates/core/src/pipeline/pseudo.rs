use serde::{Deserialize, Serialize};

use super::learner::{run_stage, FoldFeatures, LanguageSpec, LanguageWiseLearner, PooledLearner};
use super::FoldAssignment;
use super::{OofPredictions, PipelineError};
use crate::evalx::{f1_score, Averaging};
use crate::features::{BlockKind, FeatureMatrix};
use crate::gbdt::GbdtParams;

/// What the pseudo column carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PseudoMode {
    /// The prior probability.
    #[default]
    Soft,
    /// The prior thresholded at 0.5.
    Hard,
}

impl PseudoMode {
    fn encode(self, p: f64) -> f64 {
        match self {
            PseudoMode::Soft => p,
            PseudoMode::Hard => (p >= 0.5) as u8 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoConfig {
    /// Stop once an iteration improves OOF F1 by less than this.
    pub epsilon: f64,
    pub max_iters: usize,
    pub mode: PseudoMode,
    pub averaging: Averaging,
}

/// Training inputs shared by every iteration.
pub struct PseudoInputs<'a> {
    pub base: &'a FeatureMatrix,
    pub base_test: Option<&'a FeatureMatrix>,
    pub labels: &'a [f64],
    pub folds: &'a FoldAssignment,
    pub params: &'a GbdtParams,
    /// Fit per-language boosters instead of one pooled booster.
    pub languages: Option<LanguageSpec<'a>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoStep {
    /// 0 is the prior.
    pub iteration: usize,
    /// F1 over all OOF predictions of this iteration.
    pub f1: f64,
    /// Feature width used by this iteration.
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct PseudoOutcome {
    /// Rows of fold `j` come from iteration `fold_choice[j]`.
    pub best: OofPredictions,
    /// Test predictions of `best_iteration`.
    pub best_test: Option<Vec<f64>>,
    /// Iteration picked by the stopping rule on the full OOF vector.
    pub best_iteration: usize,
    /// Iteration picked for each outer fold from rows outside that fold.
    pub fold_choice: Vec<usize>,
    pub trace: Vec<PseudoStep>,
}

fn f1_on(
    probs: &[f64],
    y: &[bool],
    rows: &[usize],
    averaging: Averaging,
) -> Result<f64, PipelineError> {
    let t: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
    let p: Vec<bool> = rows.iter().map(|&r| probs[r] >= 0.5).collect();
    f1_score(&t, &p, averaging).map_err(|e| PipelineError::LengthMismatch(e.to_string()))
}

/// Applies the stopping rule to a score sequence whose entry 0 is the
/// prior: stop after the first iteration that improves by less than
/// `epsilon`, return the best iteration (>= 1) seen so far, earliest on
/// ties. `None` while the rule has not fired and iterations remain.
fn stop_rule(scores: &[f64], epsilon: f64, max_iters: usize) -> Option<usize> {
    let mut best = 1;
    for t in 1..scores.len() {
        if scores[t] > scores[best] {
            best = t;
        }
        if scores[t] - scores[t - 1] < epsilon || t == max_iters {
            return Some(best);
        }
    }
    None
}

/// Feeds predictions back as features: iteration `t` trains on the base
/// features plus one pseudo column per earlier round (the prior, then each
/// previous iteration's output). Fold `j` models only ever see fold-`j`
/// vectors, so pseudo features never carry fold-`j` labels.
///
/// Stopping: an iteration that improves F1 by less than `epsilon` over
/// the previous one (the prior counts as iteration 0) ends the search, as
/// does `max_iters`; the best iteration seen is returned, earliest on ties.
/// The rule runs once per outer fold on the fold-wise predictions of rows
/// outside that fold, which picks the iteration used for the fold's OOF
/// rows, and once on the full OOF vector, which picks the iteration whose
/// test predictions are returned.
pub fn pseudo_label_iteration(
    inputs: &PseudoInputs<'_>,
    prior: &OofPredictions,
    prior_test: Option<&[f64]>,
    config: &PseudoConfig,
) -> Result<PseudoOutcome, PipelineError> {
    let folds = inputs.folds;
    let k = folds.k();
    let n = inputs.base.n_rows();
    super::learner::check_lengths(n, inputs.labels.len(), folds.len())?;
    if prior.probs.len() != n || &prior.folds != folds {
        return Err(PipelineError::ModelMismatch(format!(
            "prior {} does not match the training rows",
            prior.producer
        )));
    }
    if config.max_iters == 0 {
        return Err(PipelineError::BadConfig(
            "pseudo_max_iters must be at least 1".into(),
        ));
    }
    let prior_fw = prior
        .foldwise
        .as_ref()
        .ok_or_else(|| PipelineError::MissingFoldwise(prior.producer.clone()))?;
    if inputs.base_test.is_some() != prior_test.is_some() {
        return Err(PipelineError::BadConfig(
            "test features and prior test predictions go together".into(),
        ));
    }
    let y: Vec<bool> = inputs.labels.iter().map(|&v| v == 1.0).collect();
    let all: Vec<usize> = (0..n).collect();
    let outside: Vec<Vec<usize>> = (0..k).map(|j| folds.rows_outside(j)).collect();

    let encode = |v: &[f64]| {
        v.iter()
            .map(|&p| config.mode.encode(p))
            .collect::<Vec<f64>>()
    };
    // extra[j] = pseudo columns visible to outer fold j
    let mut extra: Vec<Vec<Vec<f64>>> = prior_fw.iter().map(|v| vec![encode(v)]).collect();
    let mut test_features = match (inputs.base_test, prior_test) {
        (Some(t), Some(p)) => Some(t.with_column(BlockKind::Pseudo, &encode(p))?),
        _ => None,
    };

    let mut global_scores = vec![f1_on(&prior.probs, &y, &all, config.averaging)?];
    let mut fold_scores: Vec<Vec<f64>> = (0..k)
        .map(|j| f1_on(&prior_fw[j], &y, &outside[j], config.averaging).map(|f| vec![f]))
        .collect::<Result<_, _>>()?;
    let mut trace = vec![PseudoStep {
        iteration: 0,
        f1: global_scores[0],
        width: inputs.base.width(),
    }];
    let mut iterations: Vec<(OofPredictions, Option<Vec<f64>>)> = Vec::new();
    let mut global_choice = None;
    let mut fold_choice: Vec<Option<usize>> = vec![None; k];

    for iteration in 1..=config.max_iters {
        let features = FoldFeatures::Augmented {
            base: inputs.base,
            extra: extra.clone(),
        };
        let width = features.width();
        let producer = format!("pseudo_{iteration}");
        let pooled = PooledLearner {
            features,
            labels: inputs.labels,
            params: inputs.params,
            test: test_features.as_ref(),
        };
        let (oof, test) = match inputs.languages {
            Some(spec) => {
                let learner = LanguageWiseLearner::new(pooled, spec);
                let out = run_stage(&learner, folds, &producer, true, inputs.params.execution)?;
                (out.oof, out.test)
            }
            None => {
                let out = run_stage(&pooled, folds, &producer, true, inputs.params.execution)?;
                (out.oof, out.test)
            }
        };
        let f1 = f1_on(&oof.probs, &y, &all, config.averaging)?;
        trace.push(PseudoStep {
            iteration,
            f1,
            width,
        });
        global_scores.push(f1);
        let fw = oof.foldwise.as_ref().expect("nested stage");
        for j in 0..k {
            fold_scores[j].push(f1_on(&fw[j], &y, &outside[j], config.averaging)?);
            extra[j].push(encode(&fw[j]));
        }
        if let (Some(tf), Some(t)) = (&test_features, &test) {
            test_features = Some(tf.with_column(BlockKind::Pseudo, &encode(t))?);
        }
        iterations.push((oof, test));

        global_choice =
            global_choice.or_else(|| stop_rule(&global_scores, config.epsilon, config.max_iters));
        for j in 0..k {
            fold_choice[j] = fold_choice[j]
                .or_else(|| stop_rule(&fold_scores[j], config.epsilon, config.max_iters));
        }
        if global_choice.is_some() && fold_choice.iter().all(Option::is_some) {
            break;
        }
    }
    let fold_choice: Vec<usize> = fold_choice
        .into_iter()
        .map(|c| c.expect("rule fires by max_iters"))
        .collect();
    let best_iteration = global_choice.expect("rule fires by max_iters");

    let mut probs = vec![0.0; n];
    let mut foldwise = Vec::with_capacity(k);
    for (j, &t) in fold_choice.iter().enumerate() {
        let chosen = &iterations[t - 1].0;
        for r in folds.rows_in(j) {
            probs[r] = chosen.probs[r];
        }
        foldwise.push(chosen.foldwise.as_ref().expect("nested stage")[j].clone());
    }
    let best = OofPredictions {
        producer: "pseudo".into(),
        probs,
        folds: folds.clone(),
        foldwise: Some(foldwise),
    };
    let best_test = iterations.swap_remove(best_iteration - 1).1;
    Ok(PseudoOutcome {
        best,
        best_test,
        best_iteration,
        fold_choice,
        trace,
    })
}
