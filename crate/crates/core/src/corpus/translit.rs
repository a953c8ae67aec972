//! Table-driven romanized-to-native transliteration.

use std::collections::HashMap;

use super::{CorpusError, LanguageTag};

/// Rewrites romanized text into a target script.
pub trait Transliterator: Send + Sync {
    fn transliterate(&self, text: &str) -> String;
}

/// Leaves text untouched.
#[derive(Clone, Copy, Debug, Default)]
pub struct PassThrough;

impl Transliterator for PassThrough {
    fn transliterate(&self, text: &str) -> String {
        text.to_owned()
    }
}

/// Ordered Latin-to-target rewrite rules applied longest match first.
///
/// Matching runs over maximal runs of ASCII letters, lowercased. At each
/// position the longest rule source that matches wins; among equal-length
/// sources the earlier rule wins. Letters no rule covers, and every non-ASCII
/// character, pass through unchanged.
#[derive(Clone, Debug)]
pub struct TransliterationTable {
    target: LanguageTag,
    rules: Vec<(String, String)>,
    // source -> index of the first rule with that source
    index: HashMap<String, usize>,
    max_source_len: usize,
}

impl TransliterationTable {
    pub fn new(target: LanguageTag, rules: Vec<(String, String)>) -> Result<Self, CorpusError> {
        if rules.is_empty() {
            return Err(CorpusError::BadTable("no rules".into()));
        }
        let mut index = HashMap::with_capacity(rules.len());
        let mut max_source_len = 0;
        for (i, (src, _)) in rules.iter().enumerate() {
            if src.is_empty() || !src.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(CorpusError::BadTable(format!(
                    "rule {i} has source {src:?}; sources must be non-empty lowercase ASCII"
                )));
            }
            index.entry(src.clone()).or_insert(i);
            max_source_len = max_source_len.max(src.len());
        }
        Ok(TransliterationTable {
            target,
            rules,
            index,
            max_source_len,
        })
    }

    pub fn target(&self) -> &LanguageTag {
        &self.target
    }

    pub fn rules(&self) -> &[(String, String)] {
        &self.rules
    }

    /// The shipped romanized Hindi to Devanagari table.
    ///
    /// A consonant followed by a vowel yields the consonant with the vowel
    /// sign (`a` is inherent); a bare consonant gets a virama so that
    /// clusters such as `kya` join; a vowel not preceded by a consonant yields
    /// the independent vowel letter.
    pub fn hindi() -> Self {
        const VIRAMA: &str = "\u{094D}";
        const CONSONANTS: &[(&str, &str)] = &[
            ("k", "क"),
            ("kh", "ख"),
            ("g", "ग"),
            ("gh", "घ"),
            ("ch", "च"),
            ("chh", "छ"),
            ("j", "ज"),
            ("jh", "झ"),
            ("tt", "ट"),
            ("tth", "ठ"),
            ("dd", "ड"),
            ("ddh", "ढ"),
            ("t", "त"),
            ("th", "थ"),
            ("d", "द"),
            ("dh", "ध"),
            ("n", "न"),
            ("p", "प"),
            ("ph", "फ"),
            ("f", "फ़"),
            ("b", "ब"),
            ("bh", "भ"),
            ("m", "म"),
            ("y", "य"),
            ("r", "र"),
            ("l", "ल"),
            ("v", "व"),
            ("w", "व"),
            ("sh", "श"),
            ("s", "स"),
            ("h", "ह"),
            ("z", "ज़"),
            ("q", "क़"),
            ("c", "क"),
            ("x", "क्स"),
        ];
        // (romanization, independent letter, vowel sign)
        const VOWELS: &[(&str, &str, &str)] = &[
            ("a", "अ", ""),
            ("aa", "आ", "ा"),
            ("i", "इ", "ि"),
            ("ii", "ई", "ी"),
            ("ee", "ई", "ी"),
            ("u", "उ", "ु"),
            ("uu", "ऊ", "ू"),
            ("oo", "ऊ", "ू"),
            ("e", "ए", "े"),
            ("ai", "ऐ", "ै"),
            ("o", "ओ", "ो"),
            ("au", "औ", "ौ"),
        ];
        let mut rules = Vec::new();
        for (lat, ind, _) in VOWELS {
            rules.push((lat.to_string(), ind.to_string()));
        }
        for (c_lat, c_dev) in CONSONANTS {
            for (v_lat, _, sign) in VOWELS {
                rules.push((format!("{c_lat}{v_lat}"), format!("{c_dev}{sign}")));
            }
        }
        for (c_lat, c_dev) in CONSONANTS {
            rules.push((c_lat.to_string(), format!("{c_dev}{VIRAMA}")));
        }
        TransliterationTable::new(LanguageTag::new("hi").expect("valid code"), rules)
            .expect("shipped table is valid")
    }
}

impl Transliterator for TransliterationTable {
    fn transliterate(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len() * 2);
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < text.len() {
            if !bytes[i].is_ascii_alphabetic() {
                let ch = text[i..].chars().next().expect("char boundary");
                out.push(ch);
                i += ch.len_utf8();
                continue;
            }
            let run_end = i + bytes[i..]
                .iter()
                .take_while(|b| b.is_ascii_alphabetic())
                .count();
            let run = text[i..run_end].to_ascii_lowercase();
            let mut pos = 0;
            while pos < run.len() {
                let longest = self.max_source_len.min(run.len() - pos);
                let hit = (1..=longest)
                    .rev()
                    .find_map(|len| self.index.get(&run[pos..pos + len]).map(|&r| (len, r)));
                match hit {
                    Some((len, rule)) => {
                        out.push_str(&self.rules[rule].1);
                        pos += len;
                    }
                    None => {
                        // keep the original casing for unmatched letters
                        out.push(bytes[i + pos] as char);
                        pos += 1;
                    }
                }
            }
            i = run_end;
        }
        out
    }
}

/// Free-function form of [`Transliterator::transliterate`] for a table.
pub fn transliterate(text: &str, table: &TransliterationTable) -> String {
    table.transliterate(text)
}
