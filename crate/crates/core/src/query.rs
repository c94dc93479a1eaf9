//! Query expressions that materialize nodes as document sets.
//!
//! Grammar (keywords are case-sensitive):
//!
//! ```text
//! query   := or
//! or      := and ( "OR" and )*
//! and     := unary ( "AND" unary )*
//! unary   := "NOT" unary | primary
//! primary := "(" query ")" | "*:*" | FIELD ":" value | FIELD ":" "(" group ")"
//! value   := BARE | "\"" phrase "\""
//! ```
//!
//! Inside `FIELD:( ... )` bare values inherit the field, so `skills:(java OR spark)`
//! is `skills:java OR skills:spark`. Every leaf must resolve to a field. Bare
//! values may escape special characters with a backslash.

use std::fmt;

use crate::analysis::{normalize_query_value, tokenize};
use crate::docset::DocSet;
use crate::error::{Result, SkgError};
use crate::index::IndexSnapshot;
use crate::schema::FieldKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryExpr {
    Term { field: String, value: String },
    Phrase { field: String, terms: Vec<String> },
    And(Vec<QueryExpr>),
    Or(Vec<QueryExpr>),
    Not(Box<QueryExpr>),
    All,
}

impl QueryExpr {
    pub fn term(field: impl Into<String>, value: impl Into<String>) -> Self {
        QueryExpr::Term {
            field: field.into(),
            value: value.into(),
        }
    }

    pub fn phrase<S: Into<String>>(field: impl Into<String>, terms: impl IntoIterator<Item = S>) -> Self {
        QueryExpr::Phrase {
            field: field.into(),
            terms: terms.into_iter().map(Into::into).collect(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: QueryExpr) -> Self {
        QueryExpr::Not(Box::new(inner))
    }

    /// And over `parts`, collapsing the single-element case.
    pub fn and_all(mut parts: Vec<QueryExpr>) -> Self {
        match parts.len() {
            0 => QueryExpr::All,
            1 => parts.pop().unwrap(),
            _ => QueryExpr::And(parts),
        }
    }

    /// Or over `parts`, collapsing the single-element case. Empty input yields the
    /// empty set `NOT *:*`.
    pub fn or_any(mut parts: Vec<QueryExpr>) -> Self {
        match parts.len() {
            0 => QueryExpr::not(QueryExpr::All),
            1 => parts.pop().unwrap(),
            _ => QueryExpr::Or(parts),
        }
    }

    /// Rewrites every leaf field through `f`.
    pub fn map_fields(&self, f: &impl Fn(&str) -> String) -> QueryExpr {
        match self {
            QueryExpr::Term { field, value } => QueryExpr::term(f(field), value.clone()),
            QueryExpr::Phrase { field, terms } => QueryExpr::phrase(f(field), terms.clone()),
            QueryExpr::And(xs) => QueryExpr::And(xs.iter().map(|x| x.map_fields(f)).collect()),
            QueryExpr::Or(xs) => QueryExpr::Or(xs.iter().map(|x| x.map_fields(f)).collect()),
            QueryExpr::Not(x) => QueryExpr::not(x.map_fields(f)),
            QueryExpr::All => QueryExpr::All,
        }
    }

    /// Human-readable label for a materialized node.
    pub fn label(&self) -> String {
        match self {
            QueryExpr::Term { value, .. } => value.clone(),
            QueryExpr::Phrase { terms, .. } => terms.join(" "),
            other => other.to_string(),
        }
    }
}

/// A node materialized at query time: its expression and the documents it matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializedNode {
    pub expr: QueryExpr,
    pub docs: DocSet,
    pub label: String,
}

pub fn materialize(expr: &QueryExpr, snapshot: &IndexSnapshot) -> Result<MaterializedNode> {
    Ok(MaterializedNode {
        docs: evaluate(expr, snapshot)?,
        label: expr.label(),
        expr: expr.clone(),
    })
}

/// Evaluates an expression to the set of matching documents.
pub fn evaluate(expr: &QueryExpr, snapshot: &IndexSnapshot) -> Result<DocSet> {
    match expr {
        QueryExpr::All => Ok(snapshot.all_docs()),
        QueryExpr::Term { field, value } => {
            let kind = snapshot.field_kind(field)?;
            leaf_docset(snapshot, field, kind, normalize_query_value(value, kind))
        }
        QueryExpr::Phrase { field, terms } => {
            let kind = snapshot.field_kind(field)?;
            let terms = match kind {
                FieldKind::AnalyzedText => terms.iter().flat_map(|t| tokenize(t)).collect(),
                FieldKind::ExactString => normalize_query_value(&terms.join(" "), kind),
            };
            if terms.is_empty() {
                return Err(SkgError::EmptyPhrase);
            }
            leaf_docset(snapshot, field, kind, terms)
        }
        QueryExpr::And(children) => {
            if children.is_empty() {
                return Err(SkgError::InvalidRequest("AND with no operands".into()));
            }
            let mut sets = children
                .iter()
                .map(|c| evaluate(c, snapshot))
                .collect::<Result<Vec<_>>>()?;
            sets.sort_by_key(DocSet::len);
            let mut acc = sets[0].clone();
            for s in &sets[1..] {
                if acc.is_empty() {
                    break;
                }
                acc = acc.intersect(s);
            }
            Ok(acc)
        }
        QueryExpr::Or(children) => {
            if children.is_empty() {
                return Err(SkgError::InvalidRequest("OR with no operands".into()));
            }
            let mut acc = snapshot.empty_docs();
            for c in children {
                acc = acc.union(&evaluate(c, snapshot)?);
            }
            Ok(acc)
        }
        QueryExpr::Not(inner) => Ok(snapshot.all_docs().difference(&evaluate(inner, snapshot)?)),
    }
}

fn leaf_docset(snapshot: &IndexSnapshot, field: &str, kind: FieldKind, terms: Vec<String>) -> Result<DocSet> {
    match terms.len() {
        0 => Ok(snapshot.empty_docs()),
        1 => snapshot.term_docset(field, &terms[0]),
        _ if kind == FieldKind::AnalyzedText => snapshot.phrase_docset(field, &terms),
        _ => unreachable!("exact fields normalize to one term"),
    }
}

// ---------------------------------------------------------------------------
// Parsing

pub fn parse_query(text: &str) -> Result<QueryExpr> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = p.parse_or(None)?;
    if let Some(t) = p.peek() {
        return Err(SkgError::syntax(t.at, format!("unexpected {}", t.kind.describe())));
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    /// A bare word; `colon` is set when it is immediately followed by `:`.
    Word { text: String, colon: bool },
    Quoted(String),
    And,
    Or,
    Not,
    MatchAll,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Word { text, .. } => format!("`{text}`"),
            Tok::Quoted(s) => format!("\"{s}\""),
            Tok::And => "AND".into(),
            Tok::Or => "OR".into(),
            Tok::Not => "NOT".into(),
            Tok::MatchAll => "`*:*`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    at: usize,
}

fn is_special(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"' | ':' | '\\')
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(at, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        match c {
            '(' => {
                chars.next();
                out.push(Token { kind: Tok::LParen, at });
            }
            ')' => {
                chars.next();
                out.push(Token { kind: Tok::RParen, at });
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, e)) => s.push(e),
                            None => break,
                        },
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(SkgError::syntax(at, "unterminated quoted phrase"));
                }
                out.push(Token { kind: Tok::Quoted(s), at });
            }
            ':' => return Err(SkgError::syntax(at, "`:` without a field name")),
            _ => {
                let mut s = String::new();
                let mut escaped = false;
                while let Some(&(i, c)) = chars.peek() {
                    if c == '\\' {
                        escaped = true;
                        chars.next();
                        match chars.next() {
                            Some((_, e)) => s.push(e),
                            None => return Err(SkgError::syntax(i, "dangling escape")),
                        }
                    } else if is_special(c) {
                        break;
                    } else {
                        s.push(c);
                        chars.next();
                    }
                }
                let colon = matches!(chars.peek(), Some(&(_, ':')));
                if colon {
                    chars.next();
                }
                let kind = match (s.as_str(), colon) {
                    _ if escaped => Tok::Word { text: s, colon },
                    ("*", true) => {
                        if matches!(chars.peek(), Some(&(_, '*'))) {
                            chars.next();
                            Tok::MatchAll
                        } else {
                            return Err(SkgError::syntax(at, "expected `*:*`"));
                        }
                    }
                    ("AND", false) => Tok::And,
                    ("OR", false) => Tok::Or,
                    ("NOT", false) => Tok::Not,
                    _ => Tok::Word { text: s, colon },
                };
                out.push(Token { kind, at });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.at)
    }

    fn eat(&mut self, kind: &Tok) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_or(&mut self, field: Option<&str>) -> Result<QueryExpr> {
        let mut parts = vec![self.parse_and(field)?];
        while self.eat(&Tok::Or) {
            parts.push(self.parse_and(field)?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { QueryExpr::Or(parts) })
    }

    fn parse_and(&mut self, field: Option<&str>) -> Result<QueryExpr> {
        let mut parts = vec![self.parse_unary(field)?];
        while self.eat(&Tok::And) {
            parts.push(self.parse_unary(field)?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { QueryExpr::And(parts) })
    }

    fn parse_unary(&mut self, field: Option<&str>) -> Result<QueryExpr> {
        if self.eat(&Tok::Not) {
            return Ok(QueryExpr::not(self.parse_unary(field)?));
        }
        self.parse_primary(field)
    }

    fn parse_primary(&mut self, field: Option<&str>) -> Result<QueryExpr> {
        let at = self.here();
        let Some(tok) = self.peek().cloned() else {
            return Err(SkgError::syntax(at, "unexpected end of query"));
        };
        self.pos += 1;
        match tok.kind {
            Tok::LParen => self.parse_group(field),
            Tok::MatchAll => Ok(QueryExpr::All),
            Tok::Word { text, colon: true } => {
                if text.is_empty() {
                    return Err(SkgError::syntax(at, "empty field name"));
                }
                self.parse_value(&text)
            }
            Tok::Word { text, colon: false } => match field {
                Some(f) => Ok(QueryExpr::term(f, text)),
                None => Err(SkgError::syntax(at, format!("`{text}` has no field; write `field:{text}`"))),
            },
            Tok::Quoted(s) => match field {
                Some(f) => phrase_from(f, &s, at),
                None => Err(SkgError::syntax(at, "quoted phrase has no field")),
            },
            other => Err(SkgError::syntax(at, format!("unexpected {}", other.describe()))),
        }
    }

    fn parse_group(&mut self, field: Option<&str>) -> Result<QueryExpr> {
        let inner = self.parse_or(field)?;
        let at = self.here();
        if !self.eat(&Tok::RParen) {
            return Err(SkgError::syntax(at, "expected `)`"));
        }
        Ok(inner)
    }

    fn parse_value(&mut self, field: &str) -> Result<QueryExpr> {
        let at = self.here();
        let Some(tok) = self.peek().cloned() else {
            return Err(SkgError::syntax(at, format!("missing value for field `{field}`")));
        };
        self.pos += 1;
        match tok.kind {
            Tok::Word { text, colon: false } => Ok(QueryExpr::term(field, text)),
            Tok::Quoted(s) => phrase_from(field, &s, at),
            Tok::LParen => self.parse_group(Some(field)),
            // Keywords in value position are plain values.
            Tok::And => Ok(QueryExpr::term(field, "AND")),
            Tok::Or => Ok(QueryExpr::term(field, "OR")),
            Tok::Not => Ok(QueryExpr::term(field, "NOT")),
            other => Err(SkgError::syntax(at, format!("unexpected {} after `{field}:`", other.describe()))),
        }
    }
}

fn phrase_from(field: &str, text: &str, at: usize) -> Result<QueryExpr> {
    let terms: Vec<String> = tokenize(text).collect();
    if terms.is_empty() {
        return Err(SkgError::syntax(at, "empty phrase"));
    }
    Ok(QueryExpr::phrase(field, terms))
}

// ---------------------------------------------------------------------------
// Canonical printing

fn escape_bare(value: &str, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let keyword = matches!(value, "AND" | "OR" | "NOT" | "*");
    for (i, c) in value.chars().enumerate() {
        if is_special(c) || (i == 0 && keyword) {
            write!(out, "\\")?;
        }
        write!(out, "{c}")?;
    }
    Ok(())
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::All => write!(f, "*:*"),
            QueryExpr::Term { field, value } => {
                escape_bare(field, f)?;
                write!(f, ":")?;
                escape_bare(value, f)
            }
            QueryExpr::Phrase { field, terms } => {
                escape_bare(field, f)?;
                write!(f, ":\"")?;
                let joined = terms.join(" ");
                for c in joined.chars() {
                    if matches!(c, '"' | '\\') {
                        write!(f, "\\")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "\"")
            }
            QueryExpr::And(xs) | QueryExpr::Or(xs) if xs.len() < 2 => match xs.first() {
                Some(x) => write!(f, "{x}"),
                None if matches!(self, QueryExpr::And(_)) => write!(f, "*:*"),
                None => write!(f, "NOT *:*"),
            },
            QueryExpr::And(xs) | QueryExpr::Or(xs) => {
                let op = if matches!(self, QueryExpr::And(_)) { " AND " } else { " OR " };
                write!(f, "(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{op}")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            QueryExpr::Not(x) => write!(f, "NOT {x}"),
        }
    }
}
