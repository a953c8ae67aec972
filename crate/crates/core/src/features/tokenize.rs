use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes, lowercases and splits on every character that is not a
/// letter, digit or combining mark. Combining marks stay inside tokens so
/// that Indic words with vowel signs and viramas are not broken apart.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    normalized
        .split(|c: char| !(c.is_alphanumeric() || is_combining_mark(c)))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}
