//! Shared fixtures, random corpora and brute-force oracles.
//!
//! The oracles here work on plain in-memory documents and recompute every set by
//! scanning documents one by one. They share no code with the engine beyond the
//! request and expression types they take as input.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use skg_core::{
    Document, FieldKind, FieldSchema, IndexSnapshot, IndexWriter, NodeSpec, QueryExpr, Schema, ScorerKind,
};

pub type Ids = BTreeSet<usize>;

pub fn toy10_schema() -> Schema {
    Schema::new([
        FieldSchema::new("skills", FieldKind::ExactString),
        FieldSchema::new("title", FieldKind::ExactString),
        FieldSchema::new("keywords", FieldKind::AnalyzedText),
    ])
    .expect("valid schema")
}

pub fn toy10_docs() -> Vec<Document> {
    let rows: [(&str, &[&str], &str, Option<&str>); 10] = [
        ("d1", &["java", "hadoop"], "engineer", Some("senior java engineer")),
        ("d2", &["java", "hadoop", "spark"], "engineer", Some("java software engineer")),
        ("d3", &["java", "spark"], "engineer", None),
        ("d4", &["java"], "analyst", None),
        ("d5", &["hadoop"], "analyst", None),
        ("d6", &["nursing"], "nurse", None),
        ("d7", &["nursing", "trauma"], "nurse", None),
        ("d8", &["trauma"], "nurse", None),
        ("d9", &["spark"], "engineer", None),
        ("d10", &["excel"], "analyst", None),
    ];
    rows.iter()
        .map(|(id, skills, title, kw)| {
            let mut d = Document::new(*id)
                .with("skills", skills.to_vec())
                .with("title", *title);
            if let Some(kw) = kw {
                d = d.with("keywords", *kw);
            }
            d
        })
        .collect()
}

/// TOY-10 as line-delimited JSON.
pub fn toy10_jsonl() -> String {
    toy10_docs()
        .iter()
        .map(|d| serde_json::to_string(d).expect("serializable") + "\n")
        .collect()
}

pub fn toy10_snapshot() -> Arc<IndexSnapshot> {
    build_snapshot(toy10_schema(), &toy10_docs())
}

pub fn build_snapshot(schema: Schema, docs: &[Document]) -> Arc<IndexSnapshot> {
    let mut w = IndexWriter::new(schema);
    for d in docs {
        w.add_document(d).expect("fixture document");
    }
    w.commit()
}

/// Ten employment histories with recency-suffixed fields. Eight list java in
/// their previous job (`skills_2`); five of those are now engineers (`title_1`).
pub fn recency_schema() -> Schema {
    Schema::new(
        ["skills_1", "skills_2", "skills_3", "title_1", "title_2", "title_3"]
            .into_iter()
            .map(|n| FieldSchema::new(n, FieldKind::ExactString)),
    )
    .expect("valid schema")
}

pub fn recency_docs() -> Vec<Document> {
    let rows: [(&str, &str, &str, &str, &str); 10] = [
        // id, skills_2, title_1, title_2, skills_3
        ("r1", "java", "engineer", "developer", ""),
        ("r2", "java", "engineer", "developer", "java"),
        ("r3", "java", "engineer", "analyst", ""),
        ("r4", "java", "engineer", "developer", "java"),
        ("r5", "java", "engineer", "intern", ""),
        ("r6", "java", "architect", "engineer", ""),
        ("r7", "java", "analyst", "developer", ""),
        ("r8", "java", "manager", "engineer", ""),
        ("r9", "excel", "analyst", "clerk", ""),
        ("r10", "nursing", "nurse", "nurse", ""),
    ];
    rows.iter()
        .map(|(id, s2, t1, t2, s3)| {
            let mut d = Document::new(*id)
                .with("skills_2", *s2)
                .with("title_1", *t1)
                .with("title_2", *t2);
            if !s3.is_empty() {
                d = d.with("skills_3", *s3);
            }
            d
        })
        .collect()
}

/// A document reduced to its normalized terms per field.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainDoc {
    pub id: String,
    pub fields: BTreeMap<String, BTreeSet<String>>,
}

impl PlainDoc {
    pub fn has(&self, field: &str, term: &str) -> bool {
        self.fields.get(field).is_some_and(|t| t.contains(term))
    }
}

/// A small corpus of exact-string fields, kept in plain form for the oracles.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub fields: Vec<String>,
    pub docs: Vec<PlainDoc>,
}

impl Corpus {
    pub fn schema(&self) -> Schema {
        Schema::new(self.fields.iter().map(|f| FieldSchema::new(f.clone(), FieldKind::ExactString)))
            .expect("valid schema")
    }

    pub fn documents(&self) -> Vec<Document> {
        self.docs
            .iter()
            .map(|d| {
                let mut doc = Document::new(d.id.clone());
                for (f, terms) in &d.fields {
                    if !terms.is_empty() {
                        doc = doc.with(f.clone(), terms.iter().cloned().collect::<Vec<_>>());
                    }
                }
                doc
            })
            .collect()
    }

    pub fn snapshot(&self) -> Arc<IndexSnapshot> {
        build_snapshot(self.schema(), &self.documents())
    }

    /// Every document whose `field` contains `term`, by scanning.
    pub fn docs_with(&self, field: &str, term: &str) -> Ids {
        (0..self.docs.len()).filter(|&i| self.docs[i].has(field, term)).collect()
    }

    pub fn all(&self) -> Ids {
        (0..self.docs.len()).collect()
    }

    /// Every term used in `field` anywhere in the corpus.
    pub fn vocabulary(&self, field: &str) -> BTreeSet<String> {
        self.docs
            .iter()
            .filter_map(|d| d.fields.get(field))
            .flat_map(|t| t.iter().cloned())
            .collect()
    }

    /// Each document repeated `k` times under fresh ids.
    pub fn replicate(&self, k: usize) -> Corpus {
        let mut docs = Vec::with_capacity(self.docs.len() * k);
        for copy in 0..k {
            for d in &self.docs {
                docs.push(PlainDoc {
                    id: format!("{}#{copy}", d.id),
                    fields: d.fields.clone(),
                });
            }
        }
        Corpus {
            fields: self.fields.clone(),
            docs,
        }
    }
}

/// Random corpus with up to `max_docs` documents over `fields`, each field drawing
/// from a vocabulary of `max_terms` terms `t0..`. Every document has at least one term.
pub fn random_corpus(rng: &mut impl Rng, max_docs: usize, max_terms: usize, fields: &[&str]) -> Corpus {
    let n = rng.gen_range(1..=max_docs);
    let vocab = rng.gen_range(1..=max_terms);
    // Per-term inclusion rates vary so that both rare and common terms appear.
    let rates: Vec<Vec<f64>> = fields
        .iter()
        .map(|_| (0..vocab).map(|_| rng.gen_range(0.05..0.7)).collect())
        .collect();
    let mut docs = Vec::with_capacity(n);
    for i in 0..n {
        let mut fmap = BTreeMap::new();
        for (fi, f) in fields.iter().enumerate() {
            let terms: BTreeSet<String> = (0..vocab)
                .filter(|&t| rng.gen_bool(rates[fi][t]))
                .map(|t| format!("t{t}"))
                .collect();
            fmap.insert(f.to_string(), terms);
        }
        if fmap.values().all(|t| t.is_empty()) {
            let f = fields.choose(rng).unwrap();
            let t = rng.gen_range(0..vocab);
            fmap.get_mut(*f).unwrap().insert(format!("t{t}"));
        }
        docs.push(PlainDoc {
            id: format!("doc{i}"),
            fields: fmap,
        });
    }
    Corpus {
        fields: fields.iter().map(|f| f.to_string()).collect(),
        docs,
    }
}

/// Random boolean expression over the corpus fields and vocabulary (plus one
/// term that never occurs).
pub fn random_expr(rng: &mut impl Rng, corpus: &Corpus, depth: u32) -> QueryExpr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        if rng.gen_bool(0.05) {
            return QueryExpr::All;
        }
        let field = corpus.fields.choose(rng).unwrap().clone();
        let mut vocab: Vec<String> = corpus.vocabulary(&field).into_iter().collect();
        vocab.push("absent".into());
        return QueryExpr::term(field, vocab.choose(rng).unwrap().clone());
    }
    match rng.gen_range(0..3) {
        0 => QueryExpr::And((0..rng.gen_range(1..4)).map(|_| random_expr(rng, corpus, depth - 1)).collect()),
        1 => QueryExpr::Or((0..rng.gen_range(1..4)).map(|_| random_expr(rng, corpus, depth - 1)).collect()),
        _ => QueryExpr::not(random_expr(rng, corpus, depth - 1)),
    }
}

/// Per-document predicate evaluation of an expression over exact-string fields.
pub fn oracle_matches(doc: &PlainDoc, expr: &QueryExpr) -> bool {
    match expr {
        QueryExpr::Term { field, value } => doc.has(field, &value.to_lowercase()),
        QueryExpr::Phrase { field, terms } => doc.has(field, &terms.join(" ").to_lowercase()),
        QueryExpr::And(parts) => parts.iter().all(|p| oracle_matches(doc, p)),
        QueryExpr::Or(parts) => parts.iter().any(|p| oracle_matches(doc, p)),
        QueryExpr::Not(inner) => !oracle_matches(doc, inner),
        QueryExpr::All => true,
    }
}

pub fn oracle_eval(corpus: &Corpus, expr: &QueryExpr) -> Ids {
    (0..corpus.docs.len())
        .filter(|&i| oracle_matches(&corpus.docs[i], expr))
        .collect()
}

fn common(a: &Ids, b: &Ids) -> Ids {
    a.intersection(b).copied().collect()
}

/// Brute-force edge statistics for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub z: f64,
    pub relatedness: f64,
    pub foreground_popularity: u64,
    pub background_popularity: u64,
}

pub fn oracle_score(fg: &Ids, candidate: &Ids, bg: &Ids) -> OracleScore {
    let fg = common(fg, bg);
    let cand = common(candidate, bg);
    let n = fg.len() as f64;
    let y = common(&fg, &cand).len() as f64;
    let z = if fg.is_empty() || cand.is_empty() || cand.len() == bg.len() {
        0.0
    } else {
        let p = cand.len() as f64 / bg.len() as f64;
        (y - n * p) / (n * p * (1.0 - p)).sqrt()
    };
    OracleScore {
        z,
        relatedness: 2.0 / (1.0 + (-z).exp()) - 1.0,
        foreground_popularity: y as u64,
        background_popularity: cand.len() as u64,
    }
}

/// `|FG ∩ c| / |FG|`, or `None` for an empty foreground.
pub fn oracle_consequent(fg: &Ids, candidate: &Ids, bg: &Ids) -> Option<f64> {
    let fg = common(fg, bg);
    if fg.is_empty() {
        return None;
    }
    Some(common(&fg, candidate).len() as f64 / fg.len() as f64)
}

/// Antecedent confidence for a path: `start` is the starting node's documents,
/// `intermediates` the documents of every node chosen after it.
pub fn oracle_antecedent(start: &Ids, intermediates: &[Ids], candidate: &Ids, bg: &Ids) -> Option<f64> {
    let numerator = (0..=bg.iter().max().copied().unwrap_or(0))
        .filter(|d| bg.contains(d) && start.contains(d) && candidate.contains(d))
        .count();
    let denominator = bg
        .iter()
        .filter(|d| intermediates.iter().all(|s| s.contains(d)))
        .count();
    if denominator == 0 {
        return None;
    }
    Some(numerator as f64 / denominator as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleValue {
    pub name: String,
    pub score: OracleScore,
    pub confidence: Option<f64>,
    pub key: f64,
    pub nodes: Vec<OracleLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLevel {
    pub field: String,
    pub values: Vec<OracleValue>,
}

/// Exhaustive traversal: enumerate, filter by `min_count`, score, sort, truncate,
/// append explicit values, recurse with the path intersection as foreground.
pub fn oracle_traverse(
    corpus: &Corpus,
    start: &Ids,
    bg: &Ids,
    specs: &[NodeSpec],
    default_scorer: ScorerKind,
) -> Vec<OracleLevel> {
    level_rec(corpus, start, &[], start, bg, specs, default_scorer)
}

fn level_rec(
    corpus: &Corpus,
    fg: &Ids,
    intermediates: &[Ids],
    start: &Ids,
    bg: &Ids,
    specs: &[NodeSpec],
    default_scorer: ScorerKind,
) -> Vec<OracleLevel> {
    let fg_in_bg = common(fg, bg);
    specs
        .iter()
        .map(|spec| {
            let scorer = spec.scorer.unwrap_or(default_scorer);
            let score_term = |name: String, docs: Ids| {
                let score = oracle_score(fg, &docs, bg);
                let confidence = match scorer {
                    ScorerKind::Consequent => Some(oracle_consequent(fg, &docs, bg).unwrap_or(0.0)),
                    ScorerKind::Antecedent => {
                        Some(oracle_antecedent(start, intermediates, &docs, bg).unwrap_or(0.0))
                    }
                    _ => None,
                };
                let key = match scorer {
                    ScorerKind::Relatedness => score.z,
                    ScorerKind::Popularity => score.foreground_popularity as f64,
                    _ => confidence.unwrap(),
                };
                (name, score, confidence, key, docs)
            };
            let mut ranked = Vec::new();
            if spec.discover_values {
                for term in corpus.vocabulary(&spec.field) {
                    let docs = corpus.docs_with(&spec.field, &term);
                    let in_fg = fg_in_bg.iter().filter(|d| docs.contains(d)).count() as u64;
                    if in_fg >= spec.min_count && in_fg > 0 {
                        ranked.push(score_term(term, docs));
                    }
                }
                ranked.sort_by(|a, b| {
                    key_order(b.3, a.3)
                        .then(b.1.foreground_popularity.cmp(&a.1.foreground_popularity))
                        .then(a.0.cmp(&b.0))
                });
                ranked.truncate(spec.limit as usize);
            }
            for v in &spec.values {
                let name = v.to_lowercase();
                if ranked.iter().any(|r| r.0 == name) {
                    continue;
                }
                let docs = corpus.docs_with(&spec.field, &name);
                ranked.push(score_term(name, docs));
            }
            let values = ranked
                .into_iter()
                .map(|(name, score, confidence, key, docs)| {
                    let child_fg = common(fg, &docs);
                    let mut path = intermediates.to_vec();
                    path.push(docs);
                    OracleValue {
                        nodes: level_rec(corpus, &child_fg, &path, start, bg, &spec.nodes, default_scorer),
                        name,
                        score,
                        confidence,
                        key,
                    }
                })
                .collect();
            OracleLevel {
                field: spec.field.clone(),
                values,
            }
        })
        .collect()
}

/// Scores within a relative 1e-12 count as equal, so the tie-break decides
/// between mathematically equal keys that rounded differently.
fn key_order(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0) {
        std::cmp::Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap()
    }
}

/// Random request tree over the corpus fields, up to `depth` levels deep.
pub fn random_spec(rng: &mut impl Rng, corpus: &Corpus, depth: u32) -> NodeSpec {
    let field = corpus.fields.choose(rng).unwrap().clone();
    let scorer = *[
        ScorerKind::Relatedness,
        ScorerKind::Popularity,
        ScorerKind::Consequent,
        ScorerKind::Antecedent,
    ]
    .choose(rng)
    .unwrap();
    let mut spec = NodeSpec::discover(field.clone(), rng.gen_range(0..5))
        .with_scorer(scorer)
        .with_min_count(rng.gen_range(1..3));
    if rng.gen_bool(0.3) {
        let mut vocab: Vec<String> = corpus.vocabulary(&field).into_iter().collect();
        vocab.push("absent".into());
        let k = rng.gen_range(1..=2.min(vocab.len()));
        spec = spec.with_values(vocab.choose_multiple(rng, k).cloned().collect::<Vec<_>>());
        if rng.gen_bool(0.3) {
            spec.discover_values = false;
        }
    }
    if depth > 1 && rng.gen_bool(0.6) {
        spec = spec.with_child(random_spec(rng, corpus, depth - 1));
    }
    spec
}
