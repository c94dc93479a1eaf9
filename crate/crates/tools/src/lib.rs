//! Desk-scale pipelines on top of the engine: corpus ingestion, co-term
//! cleansing, document summarization and association-rule prediction.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use skg_core::analysis::normalize_query_value;
use skg_core::{
    evaluate, DocSet, Document, FieldKind, IndexSnapshot, IndexWriter, NodeSpec, QueryExpr, ScoredValue, ScorerKind,
    ScoringContext, SkgError, TraversalRequest,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TFIDF_K: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error(transparent)]
    Skg(#[from] SkgError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = ToolError> = std::result::Result<T, E>;

/// Stages every line of a JSONL file and commits them together. Blank lines are
/// skipped. On the first bad line nothing is committed.
pub fn ingest_reader(writer: &mut IndexWriter, input: impl BufRead) -> Result<usize> {
    let mut count = 0;
    let outcome = (|| {
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let at = |message: String| ToolError::Line { line: i + 1, message };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
            let doc = Document::from_json(&value).map_err(|e| at(e.to_string()))?;
            writer.add_document(&doc).map_err(|e| at(e.to_string()))?;
            count += 1;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        writer.rollback();
        return Err(e);
    }
    writer.commit();
    Ok(count)
}

pub fn ingest_file(writer: &mut IndexWriter, path: impl AsRef<Path>) -> Result<usize> {
    let file = std::fs::File::open(path)?;
    ingest_reader(writer, std::io::BufReader::new(file))
}

/// Documents matching a raw value of `field`, analyzed like a query value.
/// Multi-word values on text fields become phrases.
pub fn value_docset(snapshot: &IndexSnapshot, field: &str, raw: &str) -> Result<DocSet> {
    let kind = snapshot.field_kind(field)?;
    let terms = normalize_query_value(raw, kind);
    Ok(match terms.len() {
        0 => snapshot.empty_docs(),
        1 => snapshot.term_docset(field, &terms[0])?,
        _ if kind == FieldKind::AnalyzedText => snapshot.phrase_docset(field, &terms)?,
        _ => unreachable!("exact fields normalize to one term"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    Blacklisted,
}

impl Verdict {
    pub fn for_score(relatedness: f64, threshold: f64) -> Self {
        if relatedness < threshold {
            Verdict::Blacklisted
        } else {
            Verdict::Kept
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Kept => "kept",
            Verdict::Blacklisted => "blacklisted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoTermPair {
    pub term_a: String,
    pub term_b: String,
    pub field: String,
    pub relatedness: f64,
    pub verdict: Verdict,
    /// Either term matched no documents.
    pub unknown: bool,
}

impl CoTermPair {
    pub fn to_tsv(&self) -> String {
        let mut line = format!(
            "{}\t{}\t{:.6}\t{}",
            self.term_a,
            self.term_b,
            self.relatedness,
            self.verdict.as_str()
        );
        if self.unknown {
            line.push_str("\tunknown");
        }
        line
    }
}

/// Reads tab-separated `term_a<TAB>term_b` lines. Blank lines and lines starting
/// with `#` are skipped.
pub fn read_pairs(input: impl BufRead) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>()[..] {
            [a, b] => out.push((a.trim().to_string(), b.trim().to_string())),
            _ => {
                return Err(ToolError::Line {
                    line: i + 1,
                    message: "expected two tab-separated terms".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Scores each pair as a two-node path (foreground `term_a`, candidate `term_b`,
/// whole corpus as background) and applies the threshold. Output order follows input.
pub fn cleanse_pairs(
    snapshot: &IndexSnapshot,
    field: &str,
    pairs: &[(String, String)],
    threshold: f64,
) -> Result<Vec<CoTermPair>> {
    snapshot.field_kind(field)?;
    let all = snapshot.all_docs();
    pairs
        .par_iter()
        .map(|(a, b)| {
            let da = value_docset(snapshot, field, a)?;
            let db = value_docset(snapshot, field, b)?;
            let unknown = da.is_empty() || db.is_empty();
            let relatedness = if unknown {
                0.0
            } else {
                let ctx = ScoringContext::new(&da, all.clone());
                ctx.edge_score(ctx.counts(&db)).relatedness
            };
            Ok(CoTermPair {
                term_a: a.clone(),
                term_b: b.clone(),
                field: field.to_string(),
                relatedness,
                verdict: Verdict::for_score(relatedness, threshold),
                unknown,
            })
        })
        .collect()
}

pub fn blacklist_fraction(pairs: &[CoTermPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().filter(|p| p.verdict == Verdict::Blacklisted).count() as f64 / pairs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub phrase: String,
    pub relatedness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// The foreground actually used, in query syntax.
    pub foreground: String,
    pub entries: Vec<SummaryEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Or of the `k` document terms with the highest `tf * ln(|D| / max(df, 1))`,
/// where tf counts occurrences in `doc_terms`. Ties go to the lexicographically
/// smaller term.
pub fn tfidf_foreground(snapshot: &IndexSnapshot, field: &str, doc_terms: &[String], k: usize) -> Result<QueryExpr> {
    let ranked = tfidf_ranking(snapshot, field, doc_terms)?;
    Ok(QueryExpr::or_any(
        ranked
            .into_iter()
            .take(k)
            .map(|(t, _)| leaf(snapshot, field, &t))
            .collect::<Result<_>>()?,
    ))
}

/// Every distinct document term with its tf-idf weight, best first.
pub fn tfidf_ranking(snapshot: &IndexSnapshot, field: &str, doc_terms: &[String]) -> Result<Vec<(String, f64)>> {
    let kind = snapshot.field_kind(field)?;
    let mut tf: HashMap<String, u64> = HashMap::new();
    for raw in doc_terms {
        let key = normalize_query_value(raw, kind).join(" ");
        if !key.is_empty() {
            *tf.entry(key).or_default() += 1;
        }
    }
    let n = snapshot.doc_count().max(1) as f64;
    let mut scored = tf
        .into_iter()
        .map(|(term, count)| {
            let df = value_docset(snapshot, field, &term)?.len().max(1) as f64;
            Ok((term, count as f64 * (n / df).ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

fn leaf(snapshot: &IndexSnapshot, field: &str, normalized: &str) -> Result<QueryExpr> {
    let kind = snapshot.field_kind(field)?;
    let terms = normalize_query_value(normalized, kind);
    Ok(if terms.len() > 1 && kind == FieldKind::AnalyzedText {
        QueryExpr::phrase(field, terms)
    } else {
        QueryExpr::term(field, normalized)
    })
}

/// Scores each phrase of a document against a topic foreground and sorts them by
/// relatedness, highest first. Without an explicit foreground the top `tfidf_k`
/// tf-idf terms of the phrase list stand in for the topic.
pub fn summarize_document(
    snapshot: &IndexSnapshot,
    field: &str,
    phrases: &[String],
    foreground: Option<&QueryExpr>,
    tfidf_k: usize,
) -> Result<Summary> {
    snapshot.field_kind(field)?;
    let fg_expr = match foreground {
        Some(e) => e.clone(),
        None => tfidf_foreground(snapshot, field, phrases, tfidf_k)?,
    };
    let fg = evaluate(&fg_expr, snapshot)?;
    let warning = fg
        .is_empty()
        .then(|| format!("foreground `{fg_expr}` matches no documents; all scores are 0"));
    let ctx = ScoringContext::new(&fg, snapshot.all_docs());
    let mut entries = phrases
        .par_iter()
        .map(|p| {
            let docs = value_docset(snapshot, field, p)?;
            let score = ctx.edge_score(ctx.counts(&docs));
            Ok((score.raw_z, SummaryEntry {
                phrase: p.clone(),
                relatedness: score.relatedness,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.phrase.cmp(&b.1.phrase)));
    Ok(Summary {
        foreground: fg_expr.to_string(),
        entries: entries.into_iter().map(|(_, e)| e).collect(),
        warning,
    })
}

/// Splits `skills_2` into (`skills`, 2).
fn recency_parts(field: &str) -> Option<(&str, u32)> {
    let (base, idx) = field.rsplit_once('_')?;
    let idx: u32 = idx.parse().ok()?;
    (!base.is_empty() && idx >= 1).then_some((base, idx))
}

/// The start query with every recency-tagged field moved `shift` entries into the past.
/// Returns `None` when some shifted field is not in the schema.
fn shift_recency(snapshot: &IndexSnapshot, expr: &QueryExpr, shift: u32) -> Option<QueryExpr> {
    let ok = std::cell::Cell::new(true);
    let shifted = expr.map_fields(&|f| match recency_parts(f) {
        Some((base, i)) => {
            let name = format!("{base}_{}", i + shift);
            if snapshot.field_kind(&name).is_err() {
                ok.set(false);
            }
            name
        }
        None => {
            ok.set(false);
            f.to_string()
        }
    });
    ok.get().then_some(shifted)
}

/// Builds the start node for a prediction. Antecedent runs drop documents that
/// already matched the query in any less recent history entry, so what remains
/// reflects progression into the queried state.
pub fn prediction_start(snapshot: &IndexSnapshot, start: &QueryExpr, scorer: ScorerKind) -> QueryExpr {
    if scorer != ScorerKind::Antecedent {
        return start.clone();
    }
    let earlier: Vec<QueryExpr> = (1..).map_while(|s| shift_recency(snapshot, start, s)).collect();
    if earlier.is_empty() {
        start.clone()
    } else {
        QueryExpr::And(vec![start.clone(), QueryExpr::not(QueryExpr::or_any(earlier))])
    }
}

/// One traversal level over `target_field` from the (possibly adjusted) start node.
pub fn predict(
    snapshot: &IndexSnapshot,
    start_query: &str,
    target_field: &str,
    scorer: ScorerKind,
    min_count: u64,
    limit: u64,
) -> Result<Vec<ScoredValue>> {
    if !matches!(scorer, ScorerKind::Consequent | ScorerKind::Antecedent) {
        return Err(ToolError::Input(format!(
            "predict needs the consequent or antecedent scorer, got {scorer}"
        )));
    }
    let start = skg_core::parse_query(start_query)?;
    let start = prediction_start(snapshot, &start, scorer);
    let request = TraversalRequest {
        starting_node: vec![start.to_string()],
        background: None,
        nodes: vec![NodeSpec::discover(target_field, limit)
            .with_scorer(scorer)
            .with_min_count(min_count)],
    };
    let mut response = skg_core::traverse(snapshot, &request)?;
    Ok(response.nodes.remove(0).values)
}
