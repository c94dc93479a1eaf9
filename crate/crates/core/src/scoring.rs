//! Edge scoring over foreground/background document sets.
//!
//! The relatedness of a candidate node is a z-score of its foreground overlap
//! against the rate at which it occurs in the background, squashed into `[-1, 1]`.
//! Association-rule confidences (consequent and antecedent) are available as
//! alternative ranking functions.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::docset::{DocId, DocSet};
use crate::error::{Result, SkgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Relatedness,
    Popularity,
    Consequent,
    Antecedent,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Relatedness => "relatedness",
            ScorerKind::Popularity => "popularity",
            ScorerKind::Consequent => "consequent",
            ScorerKind::Antecedent => "antecedent",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScorerKind {
    type Err = SkgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relatedness" => Ok(ScorerKind::Relatedness),
            "popularity" => Ok(ScorerKind::Popularity),
            "consequent" => Ok(ScorerKind::Consequent),
            "antecedent" => Ok(ScorerKind::Antecedent),
            other => Err(SkgError::InvalidRequest(format!("unknown scorer `{other}`"))),
        }
    }
}

/// Foreground and background sets for one scoring step. The foreground is
/// clipped to the background on construction.
#[derive(Debug, Clone)]
pub struct ScoringContext {
    foreground: DocSet,
    background: DocSet,
    background_is_universe: bool,
}

impl ScoringContext {
    pub fn new(foreground: &DocSet, background: DocSet) -> Self {
        let background_is_universe = background.len() == background.universe() as usize;
        let foreground = if background_is_universe {
            foreground.clone()
        } else {
            foreground.intersect(&background)
        };
        ScoringContext {
            foreground,
            background,
            background_is_universe,
        }
    }

    pub fn foreground(&self) -> &DocSet {
        &self.foreground
    }

    pub fn background(&self) -> &DocSet {
        &self.background
    }

    /// Same background, new foreground.
    pub fn with_foreground(&self, foreground: &DocSet) -> Self {
        ScoringContext::new(foreground, self.background.clone())
    }

    /// `|D_FG ∩ c|` and `|c ∩ D_BG|` for a candidate given as a raw sorted postings slice.
    pub fn counts_sorted(&self, candidate: &[DocId]) -> Counts {
        Counts {
            foreground: self.foreground.intersection_len_sorted(candidate) as u64,
            background: self.background_hits_sorted(candidate),
        }
    }

    /// `|c ∩ D_BG|` for a candidate's sorted postings.
    pub fn background_hits_sorted(&self, candidate: &[DocId]) -> u64 {
        if self.background_is_universe {
            candidate.len() as u64
        } else {
            self.background.intersection_len_sorted(candidate) as u64
        }
    }

    pub fn counts(&self, candidate: &DocSet) -> Counts {
        Counts {
            foreground: self.foreground.intersection_len(candidate) as u64,
            background: if self.background_is_universe {
                candidate.len() as u64
            } else {
                self.background.intersection_len(candidate) as u64
            },
        }
    }

    /// Assembles the full statistics bundle from precomputed counts.
    pub fn edge_score(&self, counts: Counts) -> EdgeScore {
        let raw_z = z_from_counts(
            counts.foreground,
            self.foreground.len() as u64,
            counts.background,
            self.background.len() as u64,
        );
        EdgeScore {
            relatedness: sigmoid_normalize(raw_z),
            popularity: counts.foreground,
            foreground_popularity: counts.foreground,
            background_popularity: counts.background,
            raw_z,
        }
    }
}

/// Overlap counts of one candidate with the foreground and background.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub foreground: u64,
    pub background: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub relatedness: f64,
    pub popularity: u64,
    pub foreground_popularity: u64,
    pub background_popularity: u64,
    #[serde(skip)]
    pub raw_z: f64,
}

/// `z = (y - n p) / sqrt(n p (1 - p))` with `p = background_hits / background_size`.
///
/// Returns 0 when the statistic is undefined: an empty foreground, or a
/// candidate that is absent from or universal in the background.
pub fn z_from_counts(y: u64, n: u64, background_hits: u64, background_size: u64) -> f64 {
    if n == 0 || background_size == 0 || background_hits == 0 || background_hits >= background_size {
        return 0.0;
    }
    let p = background_hits as f64 / background_size as f64;
    let n = n as f64;
    let mean = n * p;
    (y as f64 - mean) / (mean * (1.0 - p)).sqrt()
}

/// Exact ordering of the z statistics of two candidates scored against the same
/// foreground (`n` documents) and background. Floating-point z can differ in the
/// last place for equal values, which would let rounding decide ties.
pub fn cmp_z(a: Counts, b: Counts, n: u64, background_size: u64) -> Ordering {
    // z = (yN - nb) / sqrt(n b (N - b)); the common sqrt(n) cancels.
    let parts = |c: Counts| -> (i128, u64) {
        if n == 0 || c.background == 0 || c.background >= background_size {
            return (0, 1);
        }
        let num = c.foreground as i128 * background_size as i128 - n as i128 * c.background as i128;
        (num, c.background * (background_size - c.background))
    };
    let ((na, da), (nb, db)) = (parts(a), parts(b));
    match na.signum().cmp(&nb.signum()) {
        Ordering::Equal if na == 0 => Ordering::Equal,
        Ordering::Equal => {
            // Same sign: compare num_a^2 * d_b with num_b^2 * d_a.
            let lhs = wide_mul(na.unsigned_abs().pow(2), db);
            let rhs = wide_mul(nb.unsigned_abs().pow(2), da);
            if na > 0 {
                lhs.cmp(&rhs)
            } else {
                rhs.cmp(&lhs)
            }
        }
        other => other,
    }
}

/// `a * b` as a (high, low) pair of 128-bit words.
fn wide_mul(a: u128, b: u64) -> (u128, u128) {
    let lo = (a as u64 as u128) * b as u128;
    let hi = (a >> 64) * b as u128;
    let (low, carry) = lo.overflowing_add(hi << 64);
    ((hi >> 64) + carry as u128, low)
}

pub fn z_score(ctx: &ScoringContext, candidate: &DocSet) -> f64 {
    ctx.edge_score(ctx.counts(candidate)).raw_z
}

/// `2 / (1 + e^-z) - 1`, evaluated as `tanh(z / 2)`.
pub fn sigmoid_normalize(z: f64) -> f64 {
    (z / 2.0).tanh()
}

pub fn relatedness(ctx: &ScoringContext, candidate: &DocSet) -> EdgeScore {
    ctx.edge_score(ctx.counts(candidate))
}

pub fn popularity(ctx: &ScoringContext, candidate: &DocSet) -> u64 {
    ctx.counts(candidate).foreground
}

/// Confidence of the rule `foreground → candidate`: `|D_FG ∩ c| / |D_FG|`.
pub fn consequent_confidence(ctx: &ScoringContext, candidate: &DocSet) -> Result<f64> {
    consequent_from_counts(ctx.counts(candidate).foreground, ctx.foreground().len() as u64)
}

pub fn consequent_from_counts(overlap: u64, foreground: u64) -> Result<f64> {
    if foreground == 0 {
        return Err(SkgError::EmptyForeground);
    }
    Ok(overlap as f64 / foreground as f64)
}

/// Traversal state for antecedent scoring: the starting node's documents and
/// the running intersection of every node chosen after it.
#[derive(Debug, Clone)]
pub struct PathState {
    start: DocSet,
    background: DocSet,
    intermediates: Option<DocSet>,
}

impl PathState {
    pub fn new(start: &DocSet, background: DocSet) -> Self {
        PathState {
            start: start.intersect(&background),
            background,
            intermediates: None,
        }
    }

    /// Extends the path with a chosen node.
    pub fn push(&self, node: &DocSet) -> Self {
        let intermediates = match &self.intermediates {
            None => node.intersect(&self.background),
            Some(acc) => acc.intersect(node),
        };
        PathState {
            start: self.start.clone(),
            background: self.background.clone(),
            intermediates: Some(intermediates),
        }
    }

    pub fn at_start(&self) -> bool {
        self.intermediates.is_none()
    }

    /// `|D_start ∩ c|` for a candidate's sorted postings.
    pub fn numerator_sorted(&self, candidate: &[DocId]) -> u64 {
        self.start.intersection_len_sorted(candidate) as u64
    }

    /// `|D_BG|` at the starting node, else `|⋂ intermediates ∩ D_BG|`.
    pub fn denominator(&self) -> u64 {
        match &self.intermediates {
            None => self.background.len() as u64,
            Some(acc) => acc.len() as u64,
        }
    }
}

/// Confidence of the rule `path nodes → start`, scored for one more candidate node.
pub fn antecedent_confidence(path: &PathState, candidate: &DocSet) -> Result<f64> {
    antecedent_from_counts(
        path.start.intersection_len(candidate) as u64,
        path.denominator(),
    )
}

pub fn antecedent_from_counts(numerator: u64, denominator: u64) -> Result<f64> {
    if denominator == 0 {
        return Err(SkgError::EmptyDenominator);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Foreground conditioned on a whole path: the intersection of every node on it.
pub fn path_foreground(path: &[DocSet]) -> Result<DocSet> {
    let (first, rest) = path
        .split_first()
        .ok_or_else(|| SkgError::InvalidRequest("path must contain at least one node".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, s| acc.intersect(s)))
}
