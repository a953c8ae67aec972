//! Basic text cleaning: HTML tag removal, named-entity decoding and
//! whitespace normalisation.

const ENTITIES: [(&str, char); 5] = [
    ("&amp;", '&'),
    ("&lt;", '<'),
    ("&gt;", '>'),
    ("&quot;", '"'),
    ("&apos;", '\''),
];

/// Cleans raw comment text.
///
/// One pass strips `<...>` tags (a `<` followed by a letter, `/`, `!` or `?`
/// and closed by the next `>`), decodes the five named XML entities and
/// collapses whitespace runs to single spaces with trimming. Passes repeat
/// until the text stops changing, which makes the function idempotent even
/// for escaped markup such as `&lt;b&gt;`.
pub fn clean_text(raw: &str) -> String {
    let mut cur = one_pass(raw);
    loop {
        let next = one_pass(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn one_pass(s: &str) -> String {
    collapse_whitespace(&decode_entities(&strip_tags(s)))
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        let opens_tag = after
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?'));
        match after.find('>') {
            Some(end) if opens_tag => rest = &after[end + 1..],
            _ => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    'outer: while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (name, ch) in ENTITIES {
            if let Some(after) = tail.strip_prefix(name) {
                out.push(ch);
                rest = after;
                continue 'outer;
            }
        }
        out.push('&');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_tags() {
        assert_eq!(clean_text("<b>nice</b>"), "nice");
        assert_eq!(clean_text("<a href=\"x\">link</a> here<br/>"), "link here");
        assert_eq!(clean_text("3 < 4"), "3 < 4");
        assert_eq!(clean_text("a <b"), "a <b");
    }

    #[test]
    fn whitespace() {
        assert_eq!(clean_text("hello   world \n"), "hello world");
        assert_eq!(clean_text("\t \n"), "");
    }

    #[test]
    fn entity_reference_table() {
        // each named entity decodes to its character and nothing else does
        let table = [
            ("&amp;", "&"),
            ("&lt;", "<"),
            ("&gt;", ">"),
            ("&quot;", "\""),
            ("&apos;", "'"),
        ];
        for (ent, ch) in table {
            assert_eq!(clean_text(&format!("x {ent} y")), format!("x {ch} y"));
        }
        assert_eq!(clean_text("&amp; chill"), "& chill");
        assert_eq!(clean_text("&nbsp; &copy;"), "&nbsp; &copy;");
        assert_eq!(clean_text("&lt;b&gt;bold&lt;/b&gt;"), "bold");
    }

    #[test]
    fn devanagari_untouched() {
        assert_eq!(clean_text(" नमस्ते  दुनिया "), "नमस्ते दुनिया");
    }

    proptest! {
        #[test]
        fn idempotent(s in "[a-z<>/&;! \\n\\tampltgquos]{0,40}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
        }

        #[test]
        fn idempotent_any_unicode(s in "\\PC{0,30}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
        }
    }
}
