use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::corpus::{Corpus, LanguageTag};

/// Fold id per record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn new(fold_of: Vec<usize>, k: usize) -> Result<Self, PipelineError> {
        if k < 2 || fold_of.iter().any(|&f| f >= k) {
            return Err(PipelineError::BadK {
                k,
                n: fold_of.len(),
            });
        }
        Ok(FoldAssignment { fold_of, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.fold_of[row]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn rows_in(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn rows_outside(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    /// Rows in neither `a` nor `b`.
    pub fn rows_outside_both(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.fold_of[i] != a && self.fold_of[i] != b)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }
}

/// Stratified folds over a labeled corpus.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment, PipelineError> {
    let labels = corpus.labels()?;
    make_folds_from(&labels, &corpus.languages(), k, seed)
}

/// Stratifies by (label, language). Each cell is shuffled with the seeded
/// generator and dealt round-robin, continuing the deal where the previous
/// cell stopped, so per-cell fold sizes differ by at most one and so do the
/// overall fold sizes.
pub fn make_folds_from(
    labels: &[bool],
    languages: &[LanguageTag],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, PipelineError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(PipelineError::BadK { k, n });
    }
    if languages.len() != n {
        return Err(PipelineError::LengthMismatch(format!(
            "{} labels, {} languages",
            n,
            languages.len()
        )));
    }
    let mut cells: BTreeMap<(&LanguageTag, bool), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        cells.entry((&languages[i], labels[i])).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; n];
    let mut next = 0;
    for rows in cells.values_mut() {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            fold_of[r] = next % k;
            next += 1;
        }
    }
    FoldAssignment::new(fold_of, k)
}
