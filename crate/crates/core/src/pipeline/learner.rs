use std::collections::{BTreeMap, BTreeSet};

use super::{FoldAssignment, PipelineError};
use crate::corpus::{language_groups, LanguageTag};
use crate::exec::Execution;
use crate::features::{BlockKind, FeatureMatrix};
use crate::gbdt::{fit_gbdt, GbdtModel, GbdtParams};

/// Out-of-fold probabilities of one producer.
#[derive(Clone, Debug, PartialEq)]
pub struct OofPredictions {
    pub producer: String,
    /// `probs[i]` comes from a model that never saw fold `fold_of(i)`.
    pub probs: Vec<f64>,
    pub folds: FoldAssignment,
    /// `foldwise[j][i]` was computed without any label from fold `j`;
    /// `foldwise[j][i] == probs[i]` whenever row `i` lies in fold `j`.
    pub foldwise: Option<Vec<Vec<f64>>>,
}

/// Result of one stacking stage.
#[derive(Clone, Debug)]
pub struct StageOutput<M> {
    pub oof: OofPredictions,
    /// Mean over the outer fold models, when test features were supplied.
    pub test: Option<Vec<f64>>,
    /// Outer fold models, index = held-out fold.
    pub models: Vec<M>,
}

/// Something that can be fit on a subset of training rows.
///
/// `outer` names the outer fold whose labels the call must not depend on;
/// learners with fold-specific features use it to pick the right matrix.
pub trait FoldLearner: Sync {
    type Model: Send + Sync;
    fn fit(&self, outer: usize, train: &[usize]) -> Result<Self::Model, PipelineError>;
    fn predict(&self, outer: usize, model: &Self::Model, rows: &[usize]) -> Vec<f64>;
    fn predict_test(&self, outer: usize, model: &Self::Model) -> Option<Vec<f64>>;
}

/// Training features shared by every fold, or a shared base plus
/// fold-specific extra columns.
pub enum FoldFeatures<'a> {
    Shared(&'a FeatureMatrix),
    /// `extra[j]` holds the pseudo columns seen by outer fold `j`, each a
    /// full-length vector.
    Augmented {
        base: &'a FeatureMatrix,
        extra: Vec<Vec<Vec<f64>>>,
    },
}

impl FoldFeatures<'_> {
    pub fn n_rows(&self) -> usize {
        match self {
            FoldFeatures::Shared(m) => m.n_rows(),
            FoldFeatures::Augmented { base, .. } => base.n_rows(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FoldFeatures::Shared(m) => m.width(),
            FoldFeatures::Augmented { base, extra } => {
                base.width() + extra.first().map_or(0, Vec::len)
            }
        }
    }

    /// Training matrix of `rows` as seen by outer fold `outer`.
    pub fn select(&self, outer: usize, rows: &[usize]) -> FeatureMatrix {
        match self {
            FoldFeatures::Shared(m) => m.select_rows(rows),
            FoldFeatures::Augmented { base, extra } => {
                let mut m = base.select_rows(rows);
                for col in &extra[outer] {
                    let picked: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
                    m = m
                        .with_column(BlockKind::Pseudo, &picked)
                        .expect("row counts agree");
                }
                m
            }
        }
    }

    fn for_rows(
        &self,
        outer: usize,
        rows: &[usize],
        mut f: impl FnMut(usize, &[f64]) -> f64,
    ) -> Vec<f64> {
        match self {
            FoldFeatures::Shared(m) => rows.iter().map(|&r| f(r, m.row(r))).collect(),
            FoldFeatures::Augmented { base, extra } => {
                let mut buf = Vec::with_capacity(self.width());
                rows.iter()
                    .map(|&r| {
                        buf.clear();
                        buf.extend_from_slice(base.row(r));
                        buf.extend(extra[outer].iter().map(|c| c[r]));
                        f(r, &buf)
                    })
                    .collect()
            }
        }
    }
}

/// One booster over all training rows.
pub struct PooledLearner<'a> {
    pub features: FoldFeatures<'a>,
    pub labels: &'a [f64],
    pub params: &'a GbdtParams,
    pub test: Option<&'a FeatureMatrix>,
}

impl PooledLearner<'_> {
    fn fit_rows(&self, outer: usize, rows: &[usize]) -> Result<GbdtModel, PipelineError> {
        let x = self.features.select(outer, rows);
        let y: Vec<f64> = rows.iter().map(|&r| self.labels[r]).collect();
        Ok(fit_gbdt(&x, &y, self.params)?)
    }

    fn predict_rows(&self, outer: usize, model: &GbdtModel, rows: &[usize]) -> Vec<f64> {
        self.features
            .for_rows(outer, rows, |_, x| model.predict_row(x))
    }
}

impl FoldLearner for PooledLearner<'_> {
    type Model = GbdtModel;

    fn fit(&self, outer: usize, train: &[usize]) -> Result<GbdtModel, PipelineError> {
        self.fit_rows(outer, train)
    }

    fn predict(&self, outer: usize, model: &GbdtModel, rows: &[usize]) -> Vec<f64> {
        self.predict_rows(outer, model, rows)
    }

    fn predict_test(&self, _outer: usize, model: &GbdtModel) -> Option<Vec<f64>> {
        self.test.map(|t| {
            (0..t.n_rows())
                .map(|i| model.predict_row(t.row(i)))
                .collect()
        })
    }
}

/// Languages of the training (and optionally test) rows.
#[derive(Clone, Copy)]
pub struct LanguageSpec<'a> {
    pub train: &'a [LanguageTag],
    pub test: Option<&'a [LanguageTag]>,
    pub min_language_samples: usize,
}

/// One booster per language; small languages use a pooled booster.
pub struct LanguageWiseLearner<'a> {
    pooled: PooledLearner<'a>,
    spec: LanguageSpec<'a>,
    /// Languages with fewer than `min_language_samples` training records.
    fallback: BTreeSet<LanguageTag>,
}

#[derive(Clone, Debug)]
pub struct LanguageWiseModel {
    pub per_language: BTreeMap<LanguageTag, GbdtModel>,
    pub pooled: Option<GbdtModel>,
}

impl LanguageWiseModel {
    fn model_for(&self, language: &LanguageTag) -> &GbdtModel {
        self.per_language
            .get(language)
            .or(self.pooled.as_ref())
            .expect("pooled model is fit whenever a language lacks its own")
    }
}

impl<'a> LanguageWiseLearner<'a> {
    pub fn new(pooled: PooledLearner<'a>, spec: LanguageSpec<'a>) -> Self {
        let fallback = language_groups(spec.train)
            .into_iter()
            .filter(|(_, rows)| rows.len() < spec.min_language_samples)
            .map(|(l, _)| l)
            .collect();
        LanguageWiseLearner {
            pooled,
            spec,
            fallback,
        }
    }

    pub fn fallback_languages(&self) -> Vec<LanguageTag> {
        self.fallback.iter().cloned().collect()
    }
}

impl FoldLearner for LanguageWiseLearner<'_> {
    type Model = LanguageWiseModel;

    fn fit(&self, outer: usize, train: &[usize]) -> Result<LanguageWiseModel, PipelineError> {
        let train_langs: Vec<LanguageTag> =
            train.iter().map(|&r| self.spec.train[r].clone()).collect();
        let mut per_language = BTreeMap::new();
        for (lang, local) in language_groups(&train_langs) {
            if self.fallback.contains(&lang) {
                continue;
            }
            let rows: Vec<usize> = local.iter().map(|&i| train[i]).collect();
            per_language.insert(lang, self.pooled.fit_rows(outer, &rows)?);
        }
        let mut all: BTreeSet<&LanguageTag> = self.spec.train.iter().collect();
        if let Some(t) = self.spec.test {
            all.extend(t.iter());
        }
        let needs_pooled = all.iter().any(|l| !per_language.contains_key(*l));
        let pooled = if needs_pooled {
            Some(self.pooled.fit_rows(outer, train)?)
        } else {
            None
        };
        Ok(LanguageWiseModel {
            per_language,
            pooled,
        })
    }

    fn predict(&self, outer: usize, model: &LanguageWiseModel, rows: &[usize]) -> Vec<f64> {
        self.pooled.features.for_rows(outer, rows, |r, x| {
            model.model_for(&self.spec.train[r]).predict_row(x)
        })
    }

    fn predict_test(&self, _outer: usize, model: &LanguageWiseModel) -> Option<Vec<f64>> {
        let (x, langs) = (self.pooled.test?, self.spec.test?);
        Some(
            (0..x.n_rows())
                .map(|i| model.model_for(&langs[i]).predict_row(x.row(i)))
                .collect(),
        )
    }
}

/// Runs the outer folds (and, with `nested`, the inner fold pairs) of a
/// learner.
pub fn run_stage<L: FoldLearner>(
    learner: &L,
    folds: &FoldAssignment,
    producer: &str,
    nested: bool,
    exec: Execution,
) -> Result<StageOutput<L::Model>, PipelineError> {
    let k = folds.k();
    let n = folds.len();
    let outer = exec.try_map_range(k, |j| {
        let train = folds.rows_outside(j);
        if train.is_empty() {
            return Err(PipelineError::FoldTooSmall(j));
        }
        let model = learner.fit(j, &train)?;
        let held = folds.rows_in(j);
        let preds = learner.predict(j, &model, &held);
        let test = learner.predict_test(j, &model);
        Ok((model, held, preds, test))
    })?;

    let mut probs = vec![f64::NAN; n];
    let mut test_sum: Option<Vec<f64>> = None;
    let mut models = Vec::with_capacity(k);
    for (model, held, preds, test) in outer {
        for (&r, p) in held.iter().zip(preds) {
            probs[r] = p;
        }
        if let Some(t) = test {
            match &mut test_sum {
                Some(acc) => acc.iter_mut().zip(&t).for_each(|(a, v)| *a += v),
                None => test_sum = Some(t),
            }
        }
        models.push(model);
    }
    let test = test_sum.map(|mut t| {
        t.iter_mut().for_each(|v| *v /= k as f64);
        t
    });

    let foldwise = if nested {
        let inner = exec.try_map_range(k * k, |idx| {
            let (j, m) = (idx / k, idx % k);
            if j == m {
                return Ok(None);
            }
            let train = folds.rows_outside_both(j, m);
            if train.is_empty() {
                return Err(PipelineError::FoldTooSmall(m));
            }
            let model = learner.fit(j, &train)?;
            let held = folds.rows_in(m);
            let preds = learner.predict(j, &model, &held);
            Ok(Some((held, preds)))
        })?;
        let mut fw = vec![probs.clone(); k];
        for (idx, item) in inner.into_iter().enumerate() {
            if let Some((held, preds)) = item {
                let j = idx / k;
                for (&r, p) in held.iter().zip(preds) {
                    fw[j][r] = p;
                }
            }
        }
        Some(fw)
    } else {
        None
    };
    Ok(StageOutput {
        oof: OofPredictions {
            producer: producer.to_owned(),
            probs,
            folds: folds.clone(),
            foldwise,
        },
        test,
        models,
    })
}

/// Pooled out-of-fold training: model `j` is fit on every fold except `j`.
pub fn train_oof(
    x: &FeatureMatrix,
    y: &[f64],
    folds: &FoldAssignment,
    params: &GbdtParams,
    test: Option<&FeatureMatrix>,
) -> Result<StageOutput<GbdtModel>, PipelineError> {
    check_lengths(x.n_rows(), y.len(), folds.len())?;
    let learner = PooledLearner {
        features: FoldFeatures::Shared(x),
        labels: y,
        params,
        test,
    };
    run_stage(&learner, folds, "pooled", false, params.execution)
}

/// Language-wise out-of-fold training. Returns the stage output and the
/// languages that fell back to the pooled model.
pub fn train_oof_language_wise(
    languages: &[LanguageTag],
    x: &FeatureMatrix,
    y: &[f64],
    folds: &FoldAssignment,
    params: &GbdtParams,
    min_language_samples: usize,
    test: Option<(&FeatureMatrix, &[LanguageTag])>,
) -> Result<(StageOutput<LanguageWiseModel>, Vec<LanguageTag>), PipelineError> {
    check_lengths(x.n_rows(), y.len(), folds.len())?;
    if languages.len() != y.len() {
        return Err(PipelineError::LengthMismatch(format!(
            "{} languages for {} rows",
            languages.len(),
            y.len()
        )));
    }
    let learner = LanguageWiseLearner::new(
        PooledLearner {
            features: FoldFeatures::Shared(x),
            labels: y,
            params,
            test: test.map(|t| t.0),
        },
        LanguageSpec {
            train: languages,
            test: test.map(|t| t.1),
            min_language_samples,
        },
    );
    let out = run_stage(&learner, folds, "language_wise", false, params.execution)?;
    Ok((out, learner.fallback_languages()))
}

pub(crate) fn check_lengths(rows: usize, labels: usize, folds: usize) -> Result<(), PipelineError> {
    if rows != labels || rows != folds {
        return Err(PipelineError::LengthMismatch(format!(
            "{rows} rows, {labels} labels, {folds} fold ids"
        )));
    }
    Ok(())
}
