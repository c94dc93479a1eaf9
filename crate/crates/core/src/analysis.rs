//! Minimal deterministic analyzer shared by ingestion and query parsing.

use crate::schema::FieldKind;

/// Positions skipped between consecutive values of a multi-valued text field,
/// so that a phrase never matches across two values.
pub const VALUE_POSITION_GAP: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub term: String,
    pub position: u32,
}

impl Token {
    fn new(term: impl Into<String>, position: u32) -> Self {
        Self {
            term: term.into(),
            position,
        }
    }
}

/// Analyzes one field value.
///
/// Text fields are lowercased and split on any non-alphanumeric character, with
/// positions counting tokens. Exact fields produce the whole lowercased value as
/// a single term at position 0.
pub fn analyze_text(raw: &str, kind: FieldKind) -> Vec<Token> {
    match kind {
        FieldKind::AnalyzedText => tokenize(raw)
            .enumerate()
            .map(|(i, t)| Token::new(t, i as u32))
            .collect(),
        FieldKind::ExactString => {
            if raw.is_empty() {
                Vec::new()
            } else {
                vec![Token::new(raw.to_lowercase(), 0)]
            }
        }
    }
}

/// Analyzes every value of a (possibly multi-valued) field into one token stream.
pub fn analyze_values<S: AsRef<str>>(values: &[S], kind: FieldKind) -> Vec<Token> {
    let mut out = Vec::new();
    let mut base = 0u32;
    for value in values {
        let tokens = analyze_text(value.as_ref(), kind);
        if kind.has_positions() {
            let n = tokens.len() as u32;
            out.extend(
                tokens
                    .into_iter()
                    .map(|t| Token::new(t.term, t.position + base)),
            );
            if n > 0 {
                base += n + VALUE_POSITION_GAP;
            }
        } else {
            out.extend(tokens);
        }
    }
    out
}

/// Lowercased alphanumeric runs of `raw`.
pub fn tokenize(raw: &str) -> impl Iterator<Item = String> + '_ {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
}

/// Normalizes a query value into the term sequence it would match in a field of
/// `kind`. Exact fields always yield at most one term.
pub fn normalize_query_value(raw: &str, kind: FieldKind) -> Vec<String> {
    analyze_text(raw, kind).into_iter().map(|t| t.term).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(tokens: Vec<Token>) -> Vec<(String, u32)> {
        tokens.into_iter().map(|t| (t.term, t.position)).collect()
    }

    #[test]
    fn text_tokenizer() {
        assert_eq!(
            pairs(analyze_text("senior java engineer", FieldKind::AnalyzedText)),
            vec![
                ("senior".into(), 0),
                ("java".into(), 1),
                ("engineer".into(), 2)
            ]
        );
        assert!(analyze_text("", FieldKind::AnalyzedText).is_empty());
        assert_eq!(
            pairs(analyze_text("Senior-level, C++!", FieldKind::AnalyzedText)),
            vec![("senior".into(), 0), ("level".into(), 1), ("c".into(), 2)]
        );
    }

    #[test]
    fn exact_field_is_one_term() {
        assert_eq!(
            pairs(analyze_text("Data Scientist", FieldKind::ExactString)),
            vec![("data scientist".into(), 0)]
        );
        assert!(analyze_text("", FieldKind::ExactString).is_empty());
    }

    #[test]
    fn multi_valued_text_leaves_a_gap() {
        let toks = analyze_values(&["java engineer", "senior"], FieldKind::AnalyzedText);
        assert_eq!(
            pairs(toks),
            vec![
                ("java".into(), 0),
                ("engineer".into(), 1),
                ("senior".into(), 3)
            ]
        );
        let exact = analyze_values(&["Java", "Hadoop"], FieldKind::ExactString);
        assert_eq!(pairs(exact), vec![("java".into(), 0), ("hadoop".into(), 0)]);
    }
}
