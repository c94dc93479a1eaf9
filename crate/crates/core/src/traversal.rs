//! Multi-level graph traversal.
//!
//! A request names a starting node (query strings, And-combined) and a tree of
//! levels. At each level the values of one field are discovered from the docs-terms
//! index of the current foreground, scored against the background, ranked and
//! truncated; every returned value then becomes part of the path for the level's
//! children, whose foreground is the intersection of the whole path.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::analysis::normalize_query_value;
use crate::docset::DocSet;
use crate::error::{Result, SkgError};
use crate::index::{IndexSnapshot, TermOrd};
use crate::query::{evaluate, parse_query, QueryExpr};
use crate::schema::FieldKind;
use crate::scoring::{
    antecedent_from_counts, cmp_z, consequent_from_counts, Counts, EdgeScore, PathState, ScorerKind,
    ScoringContext,
};

pub const DEFAULT_DEPTH_CAP: usize = 5;
pub const DEFAULT_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraversalRequest {
    pub starting_node: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    #[serde(rename = "type")]
    pub field: String,
    #[serde(default = "default_limit", deserialize_with = "de_count")]
    pub limit: u64,
    #[serde(default = "default_true")]
    pub discover_values: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default = "default_min_count", deserialize_with = "de_count")]
    pub min_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<ScorerKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn discover(field: impl Into<String>, limit: u64) -> Self {
        NodeSpec {
            field: field.into(),
            limit,
            discover_values: true,
            values: Vec::new(),
            min_count: 1,
            scorer: None,
            nodes: Vec::new(),
        }
    }

    pub fn with_scorer(mut self, scorer: ScorerKind) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn with_values<S: Into<String>>(mut self, values: impl IntoIterator<Item = S>) -> Self {
        self.values = values.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_min_count(mut self, min_count: u64) -> Self {
        self.min_count = min_count;
        self
    }

    pub fn with_child(mut self, child: NodeSpec) -> Self {
        self.nodes.push(child);
        self
    }

    fn depth(&self) -> usize {
        1 + self.nodes.iter().map(NodeSpec::depth).max().unwrap_or(0)
    }
}

fn default_limit() -> u64 {
    DEFAULT_LIMIT as u64
}

fn default_min_count() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

/// Counts arrive as integers, or as integral doubles such as `3.0`.
fn de_count<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    let n = serde_json::Number::deserialize(d)?;
    if let Some(u) = n.as_u64() {
        return Ok(u);
    }
    match n.as_f64() {
        Some(f) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
        _ => Err(serde::de::Error::custom(format!(
            "expected a non-negative integer count, got {n}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalResponse {
    pub nodes: Vec<LevelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    #[serde(rename = "type")]
    pub field: String,
    pub values: Vec<ScoredValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredValue {
    pub name: String,
    #[serde(flatten)]
    pub score: EdgeScore,
    /// Rule confidence, present on consequent and antecedent levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<LevelResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct TraversalOptions {
    pub depth_cap: usize,
    pub default_scorer: ScorerKind,
}

impl Default for TraversalOptions {
    fn default() -> Self {
        TraversalOptions {
            depth_cap: DEFAULT_DEPTH_CAP,
            default_scorer: ScorerKind::Relatedness,
        }
    }
}

/// A discovered candidate value with its foreground document count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub term: String,
    pub ord: TermOrd,
    pub foreground_count: u64,
}

/// Per-level state: scoring context plus the path for antecedent scoring.
#[derive(Debug, Clone)]
pub struct LevelState {
    pub ctx: ScoringContext,
    pub path: PathState,
}

impl LevelState {
    pub fn start(foreground: &DocSet, background: DocSet) -> Self {
        LevelState {
            path: PathState::new(foreground, background.clone()),
            ctx: ScoringContext::new(foreground, background),
        }
    }

    /// State for the children of a chosen node.
    pub fn descend(&self, node: &DocSet) -> Self {
        LevelState {
            ctx: self.ctx.with_foreground(&self.ctx.foreground().intersect(node)),
            path: self.path.push(node),
        }
    }
}

#[derive(Debug, Clone)]
enum NodeDocs {
    Term(TermOrd),
    Set(DocSet),
}

#[derive(Debug, Clone)]
struct Ranked {
    name: String,
    score: EdgeScore,
    confidence: Option<f64>,
    key: f64,
    docs: NodeDocs,
}

/// Total order used for every ranked list: score descending, then foreground
/// popularity descending, then name ascending.
pub fn rank_order(a: (f64, u64, &str), b: (f64, u64, &str)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(b.1.cmp(&a.1))
        .then(a.2.cmp(b.2))
}

pub struct Traverser<'a> {
    snapshot: &'a IndexSnapshot,
    options: TraversalOptions,
}

impl<'a> Traverser<'a> {
    pub fn new(snapshot: &'a IndexSnapshot, options: TraversalOptions) -> Self {
        Traverser { snapshot, options }
    }

    /// Every term of `field` occurring in at least `min_count` foreground documents.
    pub fn discover_values(&self, ctx: &ScoringContext, field: &str, min_count: u64) -> Result<Vec<Candidate>> {
        let f = self.snapshot.field(field)?;
        let mut out: Vec<Candidate> = self
            .snapshot
            .field_term_counts(field, ctx.foreground())?
            .into_iter()
            .filter(|&(_, c)| c as u64 >= min_count)
            .map(|(ord, c)| Candidate {
                term: f.term(ord).to_string(),
                ord,
                foreground_count: c as u64,
            })
            .collect();
        out.sort_by_key(|c| c.ord);
        Ok(out)
    }

    /// Scores candidates with `scorer`, keeps the top `limit`, then appends every
    /// explicit value not already present.
    pub fn score_and_rank(
        &self,
        state: &LevelState,
        field: &str,
        candidates: &[Candidate],
        scorer: ScorerKind,
        limit: usize,
        explicit_values: &[String],
    ) -> Result<Vec<ScoredValue>> {
        Ok(self
            .rank(state, field, candidates, scorer, limit, explicit_values)?
            .into_iter()
            .map(|r| ScoredValue {
                name: r.name,
                score: r.score,
                confidence: r.confidence,
                nodes: Vec::new(),
            })
            .collect())
    }

    fn rank(
        &self,
        state: &LevelState,
        field: &str,
        candidates: &[Candidate],
        scorer: ScorerKind,
        limit: usize,
        explicit_values: &[String],
    ) -> Result<Vec<Ranked>> {
        let f = self.snapshot.field(field)?;
        let mut discovered: Vec<Ranked> = candidates
            .iter()
            .map(|c| {
                let docs = f.docs_of(c.ord);
                // Discovery already counted the foreground overlap.
                let counts = Counts {
                    foreground: c.foreground_count,
                    background: state.ctx.background_hits_sorted(docs),
                };
                self.score_one(state, scorer, c.term.clone(), counts, || {
                    state.path.numerator_sorted(docs)
                }, NodeDocs::Term(c.ord))
            })
            .collect();
        let (n, bg) = (state.ctx.foreground().len() as u64, state.ctx.background().len() as u64);
        discovered.sort_by(|a, b| {
            if scorer == ScorerKind::Relatedness {
                let counts = |r: &Ranked| Counts {
                    foreground: r.score.foreground_popularity,
                    background: r.score.background_popularity,
                };
                cmp_z(counts(b), counts(a), n, bg)
                    .then(b.score.foreground_popularity.cmp(&a.score.foreground_popularity))
                    .then(a.name.cmp(&b.name))
            } else {
                rank_order(
                    (a.key, a.score.foreground_popularity, &a.name),
                    (b.key, b.score.foreground_popularity, &b.name),
                )
            }
        });
        discovered.truncate(limit);

        let kind = self.snapshot.field_kind(field)?;
        for raw in explicit_values {
            let terms = normalize_query_value(raw, kind);
            let name = if terms.is_empty() { raw.clone() } else { terms.join(" ") };
            if discovered.iter().any(|r| r.name == name) {
                continue;
            }
            let docs = match terms.len() {
                0 => self.snapshot.empty_docs(),
                1 => self.snapshot.term_docset(field, &terms[0])?,
                _ if kind == FieldKind::AnalyzedText => self.snapshot.phrase_docset(field, &terms)?,
                _ => unreachable!("exact fields normalize to one term"),
            };
            let counts = state.ctx.counts(&docs);
            let numerator = state.path.numerator_sorted(&docs.to_vec());
            discovered.push(self.score_one(state, scorer, name, counts, || numerator, NodeDocs::Set(docs)));
        }
        Ok(discovered)
    }

    fn score_one(
        &self,
        state: &LevelState,
        scorer: ScorerKind,
        name: String,
        counts: Counts,
        antecedent_numerator: impl FnOnce() -> u64,
        docs: NodeDocs,
    ) -> Ranked {
        let score = state.ctx.edge_score(counts);
        // Undefined confidences (empty foreground or denominator) rank as 0.
        let confidence = match scorer {
            ScorerKind::Consequent => Some(
                consequent_from_counts(counts.foreground, state.ctx.foreground().len() as u64).unwrap_or(0.0),
            ),
            ScorerKind::Antecedent => {
                Some(antecedent_from_counts(antecedent_numerator(), state.path.denominator()).unwrap_or(0.0))
            }
            _ => None,
        };
        let key = match scorer {
            ScorerKind::Relatedness => score.raw_z,
            ScorerKind::Popularity => score.foreground_popularity as f64,
            ScorerKind::Consequent | ScorerKind::Antecedent => confidence.unwrap_or(0.0),
        };
        Ranked {
            name,
            score,
            confidence,
            key,
            docs,
        }
    }

    pub fn validate(&self, request: &TraversalRequest) -> Result<()> {
        if request.starting_node.is_empty() {
            return Err(SkgError::InvalidRequest("starting_node must not be empty".into()));
        }
        let depth = request.nodes.iter().map(NodeSpec::depth).max().unwrap_or(0);
        if depth > self.options.depth_cap {
            return Err(SkgError::DepthLimit {
                depth,
                cap: self.options.depth_cap,
            });
        }
        fn check(snapshot: &IndexSnapshot, spec: &NodeSpec) -> Result<()> {
            snapshot.field_kind(&spec.field)?;
            if spec.min_count < 1 {
                return Err(SkgError::InvalidRequest(format!(
                    "min_count for `{}` must be at least 1",
                    spec.field
                )));
            }
            if !spec.discover_values && spec.values.is_empty() {
                return Err(SkgError::InvalidRequest(format!(
                    "level `{}` neither discovers values nor lists any",
                    spec.field
                )));
            }
            spec.nodes.iter().try_for_each(|c| check(snapshot, c))
        }
        request.nodes.iter().try_for_each(|n| check(self.snapshot, n))
    }

    /// Parses and materializes the starting node and background of a request.
    pub fn initial_state(&self, request: &TraversalRequest) -> Result<LevelState> {
        let parts = request
            .starting_node
            .iter()
            .map(|q| parse_query(q))
            .collect::<Result<Vec<_>>>()?;
        let start = evaluate(&QueryExpr::and_all(parts), self.snapshot)?;
        let background = match &request.background {
            Some(q) => evaluate(&parse_query(q)?, self.snapshot)?,
            None => self.snapshot.all_docs(),
        };
        Ok(LevelState::start(&start, background))
    }

    pub fn traverse(&self, request: &TraversalRequest) -> Result<TraversalResponse> {
        self.validate(request)?;
        let state = self.initial_state(request)?;
        Ok(TraversalResponse {
            nodes: self.levels(&state, &request.nodes)?,
        })
    }

    fn levels(&self, state: &LevelState, specs: &[NodeSpec]) -> Result<Vec<LevelResult>> {
        specs.iter().map(|spec| self.level(state, spec)).collect()
    }

    fn level(&self, state: &LevelState, spec: &NodeSpec) -> Result<LevelResult> {
        let scorer = spec.scorer.unwrap_or(self.options.default_scorer);
        let candidates = if spec.discover_values {
            self.discover_values(&state.ctx, &spec.field, spec.min_count)?
        } else {
            Vec::new()
        };
        let limit = if spec.discover_values { spec.limit as usize } else { 0 };
        let ranked = self.rank(state, &spec.field, &candidates, scorer, limit, &spec.values)?;
        let values = if spec.nodes.is_empty() {
            ranked.into_iter().map(|r| to_value(r, Vec::new())).collect()
        } else {
            let f = self.snapshot.field(&spec.field)?;
            ranked
                .into_par_iter()
                .map(|r| {
                    let node = match &r.docs {
                        NodeDocs::Term(ord) => DocSet::from_sorted(self.snapshot.doc_count(), f.docs_of(*ord).to_vec()),
                        NodeDocs::Set(s) => s.clone(),
                    };
                    let children = self.levels(&state.descend(&node), &spec.nodes)?;
                    Ok(to_value(r, children))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(LevelResult {
            field: spec.field.clone(),
            values,
        })
    }
}

fn to_value(r: Ranked, nodes: Vec<LevelResult>) -> ScoredValue {
    ScoredValue {
        name: r.name,
        score: r.score,
        confidence: r.confidence,
        nodes,
    }
}

/// Convenience wrapper with default options.
pub fn traverse(snapshot: &IndexSnapshot, request: &TraversalRequest) -> Result<TraversalResponse> {
    Traverser::new(snapshot, TraversalOptions::default()).traverse(request)
}
