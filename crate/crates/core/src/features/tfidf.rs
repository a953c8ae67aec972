use std::collections::{BTreeMap, HashMap, HashSet};

use super::{tokenize, BlockKind, FeatureError, FeatureMatrix};
use crate::exec::Execution;

/// Fitted TF-IDF vocabulary.
///
/// Column indices follow lexicographic (code point) term order.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    terms: BTreeMap<String, usize>,
    doc_freq: Vec<u64>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.doc_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_freq.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.get(term).copied()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, usize)> {
        self.terms.iter().map(|(t, &i)| (t.as_str(), i))
    }

    pub fn doc_freq(&self, col: usize) -> u64 {
        self.doc_freq[col]
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, col: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[col] as f64)).ln() + 1.0
    }

    /// Row-wise TF-IDF of `texts` (raw counts times idf, L2-normalized).
    pub fn transform(&self, texts: &[String], exec: Execution) -> FeatureMatrix {
        let w = self.len();
        let idf: Vec<f64> = (0..w).map(|c| self.idf(c)).collect();
        let rows: Vec<Vec<f64>> = exec.map(texts, |t| {
            let mut row = vec![0.0; w];
            for tok in tokenize(t) {
                if let Some(&c) = self.terms.get(&tok) {
                    row[c] += 1.0;
                }
            }
            let mut sq = 0.0;
            for (v, f) in row.iter_mut().zip(&idf) {
                *v *= f;
                sq += *v * *v;
            }
            if sq > 0.0 {
                let norm = sq.sqrt();
                row.iter_mut().for_each(|v| *v /= norm);
            }
            row
        });
        FeatureMatrix::single_block(BlockKind::Tfidf, texts.len(), w, rows.concat())
            .expect("finite tf-idf")
    }
}

/// Keeps the `max_features` terms with the highest document frequency, ties
/// broken by lexicographic term order.
pub fn fit_tfidf(texts: &[String], max_features: usize) -> Result<Vocabulary, FeatureError> {
    if texts.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if max_features == 0 {
        return Err(FeatureError::BadMaxFeatures);
    }
    let mut df: HashMap<String, u64> = HashMap::new();
    for t in texts {
        let unique: HashSet<String> = tokenize(t).into_iter().collect();
        for tok in unique {
            *df.entry(tok).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut terms = BTreeMap::new();
    let mut doc_freq = Vec::with_capacity(ranked.len());
    for (i, (term, f)) in ranked.into_iter().enumerate() {
        terms.insert(term, i);
        doc_freq.push(f);
    }
    Ok(Vocabulary {
        terms,
        doc_freq,
        n_docs: texts.len(),
    })
}

/// [`Vocabulary::transform`] with the default execution mode.
pub fn transform_tfidf(vocab: &Vocabulary, texts: &[String]) -> FeatureMatrix {
    vocab.transform(texts, Execution::default())
}
