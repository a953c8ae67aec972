use std::collections::BTreeSet;
use std::fmt;

use super::thresholds::{apply_thresholds, ThresholdMap};
use super::{check_len, EvalError};
use crate::corpus::{CommentRecord, Corpus, CorpusError, Split};
use crate::features::FeatureMatrix;
use crate::gbdt::{fit_gbdt, GbdtParams};
use crate::pipeline::OofPredictions;

/// Replaces every label `y` with `1 - y`.
pub fn flip_labels(corpus: &Corpus) -> Result<Corpus, CorpusError> {
    let records = corpus
        .records()
        .iter()
        .map(|r| {
            let label = r
                .label
                .ok_or_else(|| CorpusError::MissingLabel(r.id.clone()))?;
            Ok(CommentRecord {
                label: Some(!label),
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Corpus::new(records, corpus.split())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseReport {
    pub n: usize,
    /// Size of the misclassified subset S.
    pub misclassified: usize,
    pub misclassified_fraction: f64,
    /// Given-label class counts inside S.
    pub subset_positive: usize,
    pub subset_negative: usize,
    /// Share of S (and of its complement) where a model fit on S alone
    /// predicts the opposite of the given label.
    pub opposite_rate_subset: f64,
    pub opposite_rate_complement: f64,
    /// Fraction of planted flips that land in S.
    pub flip_recall: Option<f64>,
    /// Fraction of S that are planted flips.
    pub flip_precision: Option<f64>,
    /// Set when S is empty; all rates are then zero.
    pub no_misclassified: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_owned(), |v| format!("{v:.6}"))
}

impl fmt::Display for NoiseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "misclassified={}", self.misclassified)?;
        writeln!(
            f,
            "misclassified_fraction={:.6}",
            self.misclassified_fraction
        )?;
        writeln!(f, "subset_positive={}", self.subset_positive)?;
        writeln!(f, "subset_negative={}", self.subset_negative)?;
        writeln!(f, "opposite_rate_subset={:.6}", self.opposite_rate_subset)?;
        writeln!(
            f,
            "opposite_rate_complement={:.6}",
            self.opposite_rate_complement
        )?;
        writeln!(f, "flip_recall={}", opt(self.flip_recall))?;
        writeln!(f, "flip_precision={}", opt(self.flip_precision))?;
        writeln!(f, "no_misclassified={}", self.no_misclassified)
    }
}

/// Harvests the records misclassified by `oof` under `thresholds`, fits a
/// fresh booster on them with their given labels and measures how often
/// it contradicts the given labels on the subset and on the rest.
/// `planted` lists known flipped rows (synthetic corpora only).
pub fn noise_probe(
    corpus: &Corpus,
    x: &FeatureMatrix,
    oof: &OofPredictions,
    thresholds: &ThresholdMap,
    params: &GbdtParams,
    planted: Option<&BTreeSet<usize>>,
) -> Result<NoiseReport, EvalError> {
    if corpus.split() != Split::Train {
        return Err(EvalError::BadArgument(
            "noise probe needs a labeled train corpus".into(),
        ));
    }
    let n = corpus.len();
    check_len(n, x.n_rows(), "corpus vs features")?;
    check_len(n, oof.probs.len(), "corpus vs predictions")?;
    if n == 0 {
        return Err(EvalError::EmptyInput);
    }
    let y = corpus.labels()?;
    let pred = apply_thresholds(&oof.probs, &corpus.languages(), thresholds);
    let subset: Vec<usize> = (0..n).filter(|&i| pred[i] != y[i]).collect();
    let subset_positive = subset.iter().filter(|&&i| y[i]).count();
    let in_subset: BTreeSet<usize> = subset.iter().copied().collect();
    let (flip_recall, flip_precision) = match planted {
        Some(p) => {
            let hit = p.intersection(&in_subset).count();
            let recall = if p.is_empty() {
                0.0
            } else {
                hit as f64 / p.len() as f64
            };
            let precision = if subset.is_empty() {
                0.0
            } else {
                hit as f64 / subset.len() as f64
            };
            (Some(recall), Some(precision))
        }
        None => (None, None),
    };
    let mut report = NoiseReport {
        n,
        misclassified: subset.len(),
        misclassified_fraction: subset.len() as f64 / n as f64,
        subset_positive,
        subset_negative: subset.len() - subset_positive,
        opposite_rate_subset: 0.0,
        opposite_rate_complement: 0.0,
        flip_recall,
        flip_precision,
        no_misclassified: subset.is_empty(),
    };
    if subset.is_empty() {
        return Ok(report);
    }
    let ys: Vec<f64> = subset.iter().map(|&i| y[i] as u8 as f64).collect();
    let model = fit_gbdt(&x.select_rows(&subset), &ys, params)?;
    let opposite = |rows: &mut dyn Iterator<Item = usize>| {
        let (mut hit, mut total) = (0usize, 0usize);
        for i in rows {
            total += 1;
            if (model.predict_row(x.row(i)) >= 0.5) != y[i] {
                hit += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    };
    report.opposite_rate_subset = opposite(&mut subset.iter().copied());
    report.opposite_rate_complement = opposite(&mut (0..n).filter(|i| !in_subset.contains(i)));
    Ok(report)
}
