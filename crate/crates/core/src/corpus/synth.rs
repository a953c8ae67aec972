//! Synthetic comment corpora with lexicon-planted labels and a known set of
//! flipped (noisy) labels.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{clean_text, CommentRecord, Corpus, CorpusError, LanguageTag, Split};
use crate::features::{tokenize, EmbeddingMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    /// Language codes with their share of records; shares sum to 1.
    pub languages: Vec<(LanguageTag, f64)>,
    /// Fraction of records whose stored label is flipped.
    pub noise_rate: f64,
    pub seed: u64,
    /// Fraction of records that are abusive before noise.
    pub abusive_rate: f64,
    /// Abusive words per language.
    pub lexicon_size: usize,
    /// Filler words per language.
    pub neutral_size: usize,
    /// Pair languages up so one language's abusive words are the other's
    /// benign markers.
    pub conflicting_lexicons: bool,
    /// Probability that an abusive record actually contains an abusive word.
    pub lexicon_coverage: f64,
    /// Probability of wrapping a word in markup or inserting an entity.
    pub markup_rate: f64,
    pub split: Split,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let lang = |c: &str, p: f64| (LanguageTag::new(c).expect("valid code"), p);
        SynthConfig {
            n: 1000,
            languages: vec![
                lang("hi", 0.5),
                lang("ta", 0.2),
                lang("te", 0.15),
                lang("ml", 0.15),
            ],
            noise_rate: 0.1,
            seed: 0,
            abusive_rate: 0.4,
            lexicon_size: 4,
            neutral_size: 60,
            conflicting_lexicons: false,
            lexicon_coverage: 1.0,
            markup_rate: 0.1,
            split: Split::Train,
            id_prefix: "c".into(),
        }
    }
}

/// Word lists used to generate each language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticLexicon {
    pub abusive: BTreeMap<LanguageTag, Vec<String>>,
    pub benign_markers: BTreeMap<LanguageTag, Vec<String>>,
    pub neutral: BTreeMap<LanguageTag, Vec<String>>,
}

impl SyntheticLexicon {
    /// Label the lexicon implies for raw `text` in `language`: abusive iff a
    /// token of the cleaned text is one of the language's abusive words.
    pub fn implied_label(&self, language: &LanguageTag, text: &str) -> bool {
        let Some(words) = self.abusive.get(language) else {
            return false;
        };
        let words: HashSet<&str> = words.iter().map(String::as_str).collect();
        tokenize(&clean_text(text))
            .iter()
            .any(|t| words.contains(t.as_str()))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Row indices whose stored label was flipped, ascending.
    pub flipped: Vec<usize>,
    /// Labels before flipping.
    pub true_labels: Vec<bool>,
    pub lexicon: SyntheticLexicon,
}

impl SyntheticCorpus {
    pub fn flipped_ids(&self) -> Vec<&str> {
        self.flipped
            .iter()
            .map(|&i| self.corpus.records()[i].id.as_str())
            .collect()
    }
}

// fixed-width syllables keep generated words uniquely decodable
const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ru", "se", "ta", "pu", "da", "gi", "bo", "ze", "fa", "hu", "yo", "ne", "wi",
];

fn word(counter: usize) -> String {
    let mut c = counter;
    let mut w = String::new();
    for _ in 0..3 {
        w.push_str(SYLLABLES[c % 16]);
        c /= 16;
    }
    debug_assert_eq!(c, 0, "word space exhausted");
    w
}

fn build_lexicon(cfg: &SynthConfig) -> Result<SyntheticLexicon, CorpusError> {
    let langs: Vec<&LanguageTag> = cfg.languages.iter().map(|(l, _)| l).collect();
    let needed = langs.len() * (2 * cfg.lexicon_size + cfg.neutral_size);
    if needed > 16usize.pow(3) {
        return Err(CorpusError::BadSynthConfig(format!(
            "vocabulary of {needed} words is too large"
        )));
    }
    let mut counter = 0;
    let mut fresh = |k: usize| -> Vec<String> {
        let out = (counter..counter + k).map(word).collect();
        counter += k;
        out
    };
    let mut lex = SyntheticLexicon {
        abusive: BTreeMap::new(),
        benign_markers: BTreeMap::new(),
        neutral: BTreeMap::new(),
    };
    let mut i = 0;
    while i < langs.len() {
        let a = fresh(cfg.lexicon_size);
        let b = fresh(cfg.lexicon_size);
        if cfg.conflicting_lexicons && i + 1 < langs.len() {
            lex.abusive.insert(langs[i].clone(), a.clone());
            lex.benign_markers.insert(langs[i].clone(), b.clone());
            lex.abusive.insert(langs[i + 1].clone(), b);
            lex.benign_markers.insert(langs[i + 1].clone(), a);
            i += 2;
        } else {
            lex.abusive.insert(langs[i].clone(), a);
            lex.benign_markers.insert(langs[i].clone(), b);
            i += 1;
        }
    }
    for l in langs {
        lex.neutral.insert(l.clone(), fresh(cfg.neutral_size));
    }
    Ok(lex)
}

fn validate(cfg: &SynthConfig) -> Result<(), CorpusError> {
    let total: f64 = cfg.languages.iter().map(|(_, p)| p).sum();
    if cfg.languages.is_empty()
        || cfg.languages.iter().any(|(_, p)| p.is_nan() || *p < 0.0)
        || (total - 1.0).abs() > 1e-9
    {
        return Err(CorpusError::BadProportions(total));
    }
    let mut seen = HashSet::new();
    if !cfg.languages.iter().all(|(l, _)| seen.insert(l)) {
        return Err(CorpusError::BadSynthConfig("duplicate language".into()));
    }
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    if !unit(cfg.noise_rate)
        || !unit(cfg.abusive_rate)
        || !unit(cfg.lexicon_coverage)
        || !unit(cfg.markup_rate)
    {
        return Err(CorpusError::BadSynthConfig(
            "rates must lie in [0, 1]".into(),
        ));
    }
    if cfg.n == 0 || cfg.lexicon_size == 0 || cfg.neutral_size == 0 {
        return Err(CorpusError::BadSynthConfig(
            "n, lexicon_size and neutral_size must be positive".into(),
        ));
    }
    Ok(())
}

/// Generates a corpus whose labels follow per-language lexicons, then flips
/// exactly `round(noise_rate * n)` labels. Deterministic in `cfg.seed`.
pub fn synthesize_corpus(cfg: &SynthConfig) -> Result<SyntheticCorpus, CorpusError> {
    validate(cfg)?;
    let lexicon = build_lexicon(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let likes = Poisson::new(4.0).expect("positive rate");
    let reports_abusive = Poisson::new(2.0).expect("positive rate");
    let reports_benign = Poisson::new(0.2).expect("positive rate");

    let mut records = Vec::with_capacity(cfg.n);
    let mut true_labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut lang = &cfg.languages[cfg.languages.len() - 1].0;
        for (l, p) in &cfg.languages {
            acc += p;
            if u < acc {
                lang = l;
                break;
            }
        }
        let abusive = rng.random_bool(cfg.abusive_rate);
        let neutral = &lexicon.neutral[lang];
        let mut words: Vec<String> = (0..rng.random_range(5..=12))
            .map(|_| neutral[rng.random_range(0..neutral.len())].clone())
            .collect();
        if rng.random_bool(0.5) {
            let markers = &lexicon.benign_markers[lang];
            let pos = rng.random_range(0..=words.len());
            words.insert(pos, markers[rng.random_range(0..markers.len())].clone());
        }
        if abusive && rng.random_bool(cfg.lexicon_coverage) {
            let bad = &lexicon.abusive[lang];
            for _ in 0..rng.random_range(1..=2) {
                let pos = rng.random_range(0..=words.len());
                words.insert(pos, bad[rng.random_range(0..bad.len())].clone());
            }
        }
        if rng.random_bool(cfg.markup_rate) {
            let pos = rng.random_range(0..words.len());
            words[pos] = format!("<b>{}</b>", words[pos]);
        }
        if rng.random_bool(cfg.markup_rate) {
            let pos = rng.random_range(0..=words.len());
            words.insert(pos, "&amp;".into());
        }
        let like_count = likes.sample(&mut rng) as u64;
        let report_count = if abusive {
            reports_abusive.sample(&mut rng)
        } else {
            reports_benign.sample(&mut rng)
        } as u64;
        records.push(CommentRecord::new(
            format!("{}{i}", cfg.id_prefix),
            words.join(" "),
            lang.clone(),
            like_count,
            report_count,
            Some(abusive),
        ));
        true_labels.push(abusive);
    }

    let n_flip = (cfg.noise_rate * cfg.n as f64).round() as usize;
    let mut flipped = index::sample(&mut rng, cfg.n, n_flip).into_vec();
    flipped.sort_unstable();
    for &i in &flipped {
        let r = &mut records[i];
        r.label = r.label.map(|l| !l);
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(records, cfg.split)?,
        flipped,
        true_labels,
        lexicon,
    })
}

/// Two-cluster embeddings: each row is `±separation/2` along a fixed random
/// unit direction (sign from the label) plus standard normal noise.
pub fn synthesize_embeddings(
    labels: &[bool],
    dim: usize,
    separation: f64,
    seed: u64,
) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut dir: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let norm = dir
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    dir.iter_mut().for_each(|v| *v /= norm);
    let mut values = Vec::with_capacity(labels.len() * dim);
    for &y in labels {
        let shift = if y {
            separation / 2.0
        } else {
            -separation / 2.0
        };
        values.extend(dir.iter().map(|d| shift * d + normal.sample(&mut rng)));
    }
    EmbeddingMatrix::new(labels.len(), dim, values).expect("finite by construction")
}
