//! Comment corpora: loading, cleaning, transliteration, partitioning and
//! synthetic generation.

mod clean;
mod record;
mod synth;
mod translit;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use clean::clean_text;
pub use record::{
    load_corpus, load_corpus_with, parse_corpus, write_corpus, write_corpus_texts, CommentRecord,
    Corpus, LanguageRegistry, LanguageTag, Split, CORPUS_HEADER,
};
pub use synth::{
    synthesize_corpus, synthesize_embeddings, SynthConfig, SyntheticCorpus, SyntheticLexicon,
};
pub use translit::{transliterate, PassThrough, TransliterationTable, Transliterator};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unexpected header {0:?}")]
    BadHeader(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("negative count {value} for record {id:?}")]
    NegativeCount { id: String, value: i64 },
    #[error("label {value:?} for record {id:?} is not 0, 1 or empty")]
    BadLabel { id: String, value: String },
    #[error("record {0:?} has no label")]
    MissingLabel(String),
    #[error("invalid language code {0:?}")]
    BadLanguageCode(String),
    #[error("invalid transliteration table: {0}")]
    BadTable(String),
    #[error("max_len must be positive")]
    BadMaxLen,
    #[error("cannot merge a {0} corpus with a {1} corpus")]
    SplitMismatch(Split, Split),
    #[error("corpora do not share the same ids: {0}")]
    IdMismatch(String),
    #[error("language proportions must be non-negative and sum to 1 (got {0})")]
    BadProportions(f64),
    #[error("invalid generator setting: {0}")]
    BadSynthConfig(String),
}

/// Per-language transliterators; languages without an entry pass through.
#[derive(Default)]
pub struct TransliteratorSet {
    by_language: HashMap<LanguageTag, Box<dyn Transliterator>>,
}

impl TransliteratorSet {
    /// Hindi gets the shipped table, everything else passes through.
    pub fn shipped() -> Self {
        let mut set = TransliteratorSet::default();
        let hindi = TransliterationTable::hindi();
        set.insert(hindi.target().clone(), Box::new(hindi));
        set
    }

    pub fn insert(&mut self, language: LanguageTag, t: Box<dyn Transliterator>) {
        self.by_language.insert(language, t);
    }

    pub fn transliterate(&self, language: &LanguageTag, text: &str) -> String {
        match self.by_language.get(language) {
            Some(t) => t.transliterate(text),
            None => text.to_owned(),
        }
    }
}

/// Fills `clean_text` (cleaned or a raw copy) and `translit_text` (the
/// transliterated clean text, or a copy when `translit` is `None`).
pub fn prepare_corpus(
    corpus: &Corpus,
    clean: bool,
    translit: Option<&TransliteratorSet>,
) -> Corpus {
    corpus.map_texts(|r| {
        let cleaned = if clean {
            clean_text(&r.raw_text)
        } else {
            r.raw_text.clone()
        };
        let tl = match translit {
            Some(set) => set.transliterate(&r.language, &cleaned),
            None => cleaned.clone(),
        };
        (cleaned, tl)
    })
}

/// Joins clean and transliterated text with one space and keeps the first
/// `max_len` code points. An empty side contributes no separator.
pub fn compose_model_text(record: &CommentRecord, max_len: usize) -> Result<String, CorpusError> {
    if max_len == 0 {
        return Err(CorpusError::BadMaxLen);
    }
    let joined = match (
        record.clean_text.is_empty(),
        record.translit_text.is_empty(),
    ) {
        (true, _) => record.translit_text.clone(),
        (false, true) => record.clean_text.clone(),
        (false, false) => format!("{} {}", record.clean_text, record.translit_text),
    };
    Ok(match joined.char_indices().nth(max_len) {
        Some((cut, _)) => joined[..cut].to_owned(),
        None => joined,
    })
}

pub const RAW_SUFFIX: &str = "#raw";
pub const CLEAN_SUFFIX: &str = "#clean";

/// Concatenates an original corpus and its cleaned counterpart, suffixing
/// ids with `#raw` and `#clean`. Both inputs must hold the same id set.
pub fn merge_oversample(original: &Corpus, cleaned: &Corpus) -> Result<Corpus, CorpusError> {
    if original.split() != cleaned.split() {
        return Err(CorpusError::SplitMismatch(
            original.split(),
            cleaned.split(),
        ));
    }
    if original.len() != cleaned.len() {
        return Err(CorpusError::IdMismatch(format!(
            "{} vs {} records",
            original.len(),
            cleaned.len()
        )));
    }
    let ids: std::collections::HashSet<&str> =
        original.records().iter().map(|r| r.id.as_str()).collect();
    if let Some(r) = cleaned
        .records()
        .iter()
        .find(|r| !ids.contains(r.id.as_str()))
    {
        return Err(CorpusError::IdMismatch(format!(
            "{:?} only in cleaned corpus",
            r.id
        )));
    }
    let tagged = |c: &Corpus, suffix: &str| -> Vec<CommentRecord> {
        c.records()
            .iter()
            .map(|r| CommentRecord {
                id: format!("{}{suffix}", r.id),
                ..r.clone()
            })
            .collect()
    };
    let mut records = tagged(original, RAW_SUFFIX);
    records.extend(tagged(cleaned, CLEAN_SUFFIX));
    Corpus::new(records, original.split())
}

/// Strips an oversampling suffix, if any.
pub fn base_id(id: &str) -> &str {
    id.strip_suffix(RAW_SUFFIX)
        .or_else(|| id.strip_suffix(CLEAN_SUFFIX))
        .unwrap_or(id)
}

/// Splits a corpus by language, keeping corpus order inside each part.
pub fn partition_by_language(corpus: &Corpus) -> BTreeMap<LanguageTag, Corpus> {
    let mut parts: BTreeMap<LanguageTag, Vec<CommentRecord>> = BTreeMap::new();
    for r in corpus.records() {
        parts.entry(r.language.clone()).or_default().push(r.clone());
    }
    parts
        .into_iter()
        .map(|(lang, recs)| {
            (
                lang,
                Corpus::new(recs, corpus.split()).expect("subset of a valid corpus"),
            )
        })
        .collect()
}

/// Row indices per language, in corpus order.
pub fn language_groups(languages: &[LanguageTag]) -> BTreeMap<LanguageTag, Vec<usize>> {
    let mut out: BTreeMap<LanguageTag, Vec<usize>> = BTreeMap::new();
    for (i, l) in languages.iter().enumerate() {
        out.entry(l.clone()).or_default().push(i);
    }
    out
}
