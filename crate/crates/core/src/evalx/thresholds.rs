use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;
use super::{check_len, unit_grid, EvalError};
use crate::corpus::{language_groups, LanguageTag};

/// Decision threshold per language with a global fallback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMap {
    pub per_language: BTreeMap<LanguageTag, f64>,
    pub global_threshold: f64,
}

impl Default for ThresholdMap {
    fn default() -> Self {
        ThresholdMap {
            per_language: BTreeMap::new(),
            global_threshold: 0.5,
        }
    }
}

impl ThresholdMap {
    pub fn threshold_for(&self, language: &LanguageTag) -> f64 {
        self.per_language
            .get(language)
            .copied()
            .unwrap_or(self.global_threshold)
    }
}

fn best_threshold(probs: &[f64], y: &[bool], grid: &[f64]) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &t in grid {
        let pred: Vec<bool> = probs.iter().map(|&p| p >= t).collect();
        let f1 = MetricReport::compute(y, &pred)
            .expect("aligned, non-empty")
            .f1;
        // `>=` so later (higher) thresholds win ties
        if f1 >= best.0 {
            best = (f1, t);
        }
    }
    best.1
}

/// Grid-searches the positive-class F1 maximizing threshold for every
/// language with at least `min_count` records; ties go to the higher
/// threshold. The global threshold is tuned the same way on all records.
pub fn tune_thresholds(
    probs: &[f64],
    y: &[bool],
    languages: &[LanguageTag],
    grid_step: f64,
    min_count: usize,
) -> Result<ThresholdMap, EvalError> {
    check_len(probs.len(), y.len(), "probabilities vs labels")?;
    check_len(probs.len(), languages.len(), "probabilities vs languages")?;
    if probs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let grid = unit_grid(grid_step)?;
    let global_threshold = best_threshold(probs, y, &grid);
    let mut per_language = BTreeMap::new();
    for (lang, rows) in language_groups(languages) {
        if rows.len() < min_count.max(1) {
            continue;
        }
        let p: Vec<f64> = rows.iter().map(|&r| probs[r]).collect();
        let t: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
        per_language.insert(lang, best_threshold(&p, &t, &grid));
    }
    Ok(ThresholdMap {
        per_language,
        global_threshold,
    })
}

/// Label 1 iff the probability reaches the record's language threshold.
pub fn apply_thresholds(probs: &[f64], languages: &[LanguageTag], map: &ThresholdMap) -> Vec<bool> {
    probs
        .iter()
        .zip(languages)
        .map(|(&p, l)| p >= map.threshold_for(l))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(s: &str) -> LanguageTag {
        LanguageTag::new(s).unwrap()
    }

    #[test]
    fn boundary_and_fallback() {
        let mut map = ThresholdMap::default();
        map.per_language.insert(tag("hi"), 0.3);
        let langs = [tag("hi"), tag("hi"), tag("ta"), tag("ta")];
        let out = apply_thresholds(&[0.3, 0.29, 0.49, 0.5], &langs, &map);
        assert_eq!(out, [true, false, false, true]);
    }

    #[test]
    fn tie_goes_high() {
        // any threshold in (0.2, 0.8] separates perfectly
        let probs = [0.2, 0.8];
        let y = [false, true];
        let langs = [tag("hi"), tag("hi")];
        let m = tune_thresholds(&probs, &y, &langs, 0.1, 1).unwrap();
        assert_eq!(m.per_language[&tag("hi")], 0.8);
        assert_eq!(m.global_threshold, 0.8);
    }

    #[test]
    fn small_languages_use_global() {
        let probs = [0.1, 0.9, 0.6];
        let y = [false, true, false];
        let langs = [tag("hi"), tag("hi"), tag("ta")];
        let m = tune_thresholds(&probs, &y, &langs, 0.5, 2).unwrap();
        assert!(m.per_language.contains_key(&tag("hi")));
        assert!(!m.per_language.contains_key(&tag("ta")));
        assert!(matches!(
            tune_thresholds(&[], &[], &[], 0.1, 1),
            Err(EvalError::EmptyInput)
        ));
    }

    #[test]
    fn serde_round_trip() {
        let mut m = ThresholdMap::default();
        m.per_language.insert(tag("te"), 0.42);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ThresholdMap>(&s).unwrap(), m);
    }
}
