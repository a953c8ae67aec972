use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Header of the comma-separated corpus file.
pub const CORPUS_HEADER: [&str; 6] = [
    "id",
    "text",
    "language",
    "like_count",
    "report_count",
    "label",
];

/// Short lowercase language code such as `hi` or `ta`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageTag(String);

impl LanguageTag {
    pub const OTHER: &'static str = "other";

    pub fn new(code: &str) -> Result<Self, CorpusError> {
        if !code.is_empty()
            && code
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        {
            Ok(LanguageTag(code.to_owned()))
        } else {
            Err(CorpusError::BadLanguageCode(code.to_owned()))
        }
    }

    pub fn other() -> Self {
        LanguageTag(Self::OTHER.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageTag {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        LanguageTag::new(&s)
    }
}

impl From<LanguageTag> for String {
    fn from(t: LanguageTag) -> String {
        t.0
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Run-time set of known languages. Anything not registered resolves to
/// `other`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageRegistry {
    codes: Vec<LanguageTag>,
    aliases: Vec<(String, LanguageTag)>,
}

const DEFAULT_LANGUAGES: &[(&str, &str)] = &[
    ("as", "assamese"),
    ("bn", "bengali"),
    ("bh", "bhojpuri"),
    ("en", "english"),
    ("gu", "gujarati"),
    ("hi", "hindi"),
    ("ha", "haryanvi"),
    ("kn", "kannada"),
    ("ml", "malayalam"),
    ("mr", "marathi"),
    ("or", "odia"),
    ("pa", "punjabi"),
    ("ra", "rajasthani"),
    ("ta", "tamil"),
    ("te", "telugu"),
    ("ur", "urdu"),
];

impl Default for LanguageRegistry {
    fn default() -> Self {
        let mut reg = LanguageRegistry {
            codes: Vec::new(),
            aliases: Vec::new(),
        };
        for (code, name) in DEFAULT_LANGUAGES {
            let tag = LanguageTag(code.to_string());
            reg.aliases.push((name.to_string(), tag.clone()));
            reg.codes.push(tag);
        }
        reg.codes.push(LanguageTag::other());
        reg
    }
}

impl LanguageRegistry {
    /// Registry holding exactly `codes` plus `other`.
    pub fn from_codes<S: AsRef<str>>(codes: &[S]) -> Result<Self, CorpusError> {
        let mut out = LanguageRegistry {
            codes: Vec::new(),
            aliases: Vec::new(),
        };
        for c in codes {
            let tag = LanguageTag::new(c.as_ref())?;
            if !out.codes.contains(&tag) {
                out.codes.push(tag);
            }
        }
        if !out.codes.iter().any(|t| t.as_str() == LanguageTag::OTHER) {
            out.codes.push(LanguageTag::other());
        }
        Ok(out)
    }

    pub fn codes(&self) -> &[LanguageTag] {
        &self.codes
    }

    /// Maps a raw language field (code or English name, any case) to a tag.
    pub fn resolve(&self, raw: &str) -> LanguageTag {
        let key = raw.trim().to_lowercase();
        if let Some(t) = self.codes.iter().find(|t| t.as_str() == key) {
            return t.clone();
        }
        if let Some((_, t)) = self.aliases.iter().find(|(name, _)| *name == key) {
            return t.clone();
        }
        LanguageTag::other()
    }
}

/// One comment with its metadata and (optional) binary label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    pub raw_text: String,
    /// Empty until cleaning.
    pub clean_text: String,
    /// Empty until transliteration.
    pub translit_text: String,
    pub language: LanguageTag,
    pub like_count: u64,
    pub report_count: u64,
    /// `Some(true)` for abusive.
    pub label: Option<bool>,
}

impl CommentRecord {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        language: LanguageTag,
        like_count: u64,
        report_count: u64,
        label: Option<bool>,
    ) -> Self {
        CommentRecord {
            id: id.into(),
            raw_text: raw_text.into(),
            clean_text: String::new(),
            translit_text: String::new(),
            language,
            like_count,
            report_count,
            label,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Ordered, id-unique collection of records. Record order is the row order of
/// every feature matrix derived from the corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<CommentRecord>,
    split: Split,
}

impl Corpus {
    pub fn new(records: Vec<CommentRecord>, split: Split) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
            if split == Split::Train && r.label.is_none() {
                return Err(CorpusError::MissingLabel(r.id.clone()));
            }
        }
        Ok(Corpus { records, split })
    }

    pub fn empty(split: Split) -> Self {
        Corpus {
            records: Vec::new(),
            split,
        }
    }

    pub fn records(&self) -> &[CommentRecord] {
        &self.records
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<CommentRecord> {
        self.records
    }

    /// Applies `f` to every record's text fields. Ids, labels and metadata are
    /// not reachable from `f`, so corpus invariants are preserved.
    pub fn map_texts<F>(&self, mut f: F) -> Corpus
    where
        F: FnMut(&CommentRecord) -> (String, String),
    {
        let records = self
            .records
            .iter()
            .map(|r| {
                let (clean, translit) = f(r);
                CommentRecord {
                    clean_text: clean,
                    translit_text: translit,
                    ..r.clone()
                }
            })
            .collect();
        Corpus {
            records,
            split: self.split,
        }
    }

    /// Labels as booleans. Fails on the first unlabeled record.
    pub fn labels(&self) -> Result<Vec<bool>, CorpusError> {
        self.records
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| CorpusError::MissingLabel(r.id.clone()))
            })
            .collect()
    }

    pub fn languages(&self) -> Vec<LanguageTag> {
        self.records.iter().map(|r| r.language.clone()).collect()
    }
}

/// Loads a corpus file with the default language registry.
pub fn load_corpus(path: &Path, split: Split) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, split, &LanguageRegistry::default())
}

pub fn load_corpus_with(
    path: &Path,
    split: Split,
    registry: &LanguageRegistry,
) -> Result<Corpus, CorpusError> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CorpusError::Io(path.display().to_string(), e))?;
    parse_corpus(&buf, split, registry)
}

/// Parses corpus bytes (header row plus data rows).
pub fn parse_corpus(
    bytes: &[u8],
    split: Split,
    registry: &LanguageRegistry,
) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let header = rdr.headers().map_err(|e| malformed(1, e))?.clone();
    if header
        .iter()
        .map(str::trim)
        .ne(CORPUS_HEADER.iter().copied())
    {
        return Err(CorpusError::BadHeader(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // data rows start on line 2
        let line = i + 2;
        let row = row.map_err(|e| malformed(line, e))?;
        let id = row[0].to_owned();
        if id.is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "empty id".into(),
            });
        }
        let like_count = parse_count(&row[3], line, &id)?;
        let report_count = parse_count(&row[4], line, &id)?;
        let label = match row[5].trim() {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => {
                return Err(CorpusError::BadLabel {
                    id,
                    value: other.to_owned(),
                })
            }
        };
        records.push(CommentRecord::new(
            id,
            &row[1],
            registry.resolve(&row[2]),
            like_count,
            report_count,
            label,
        ));
    }
    Corpus::new(records, split)
}

fn malformed(line: usize, e: csv::Error) -> CorpusError {
    CorpusError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

fn parse_count(field: &str, line: usize, id: &str) -> Result<u64, CorpusError> {
    let v: i64 = field
        .trim()
        .parse()
        .map_err(|_| CorpusError::MalformedRow {
            line,
            reason: format!("count {field:?} is not an integer"),
        })?;
    u64::try_from(v).map_err(|_| CorpusError::NegativeCount {
        id: id.to_owned(),
        value: v,
    })
}

/// Writes a corpus in the loader's format, using `raw_text` as the text
/// column.
pub fn write_corpus<W: Write>(corpus: &Corpus, out: W) -> Result<(), CorpusError> {
    write_corpus_texts(corpus, out, |r| &r.raw_text)
}

/// Writes a corpus choosing which text field goes into the text column.
pub fn write_corpus_texts<W, F>(corpus: &Corpus, out: W, text: F) -> Result<(), CorpusError>
where
    W: Write,
    F: Fn(&CommentRecord) -> &str,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| CorpusError::Io("corpus writer".into(), e.into());
    w.write_record(CORPUS_HEADER).map_err(io)?;
    for r in corpus.records() {
        let label = match r.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([
            r.id.as_str(),
            text(r),
            r.language.as_str(),
            &r.like_count.to_string(),
            &r.report_count.to_string(),
            label,
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CorpusError::Io("corpus writer".into(), e))?;
    Ok(())
}
