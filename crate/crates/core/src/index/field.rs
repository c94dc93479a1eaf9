//! Frozen per-field storage: a sorted term dictionary with postings (the
//! terms-docs inverted index) and a CSR docs-terms forward index.

use std::collections::{BTreeMap, HashMap};

use crate::docset::DocId;
use crate::schema::FieldKind;

pub type TermOrd = u32;

/// One postings entry under construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Posting {
    pub doc: DocId,
    pub positions: Vec<u32>,
}

/// Borrowed view of one term's postings.
#[derive(Debug, Clone, Copy)]
pub struct PostingsList<'a> {
    pub term: &'a str,
    docs: &'a [DocId],
    pos_offsets: Option<&'a [u32]>,
    positions: &'a [u32],
}

impl<'a> PostingsList<'a> {
    pub fn doc_frequency(&self) -> usize {
        self.docs.len()
    }

    pub fn docs(&self) -> &'a [DocId] {
        self.docs
    }

    /// Positions of the term within the `i`-th entry; empty for exact fields.
    pub fn positions(&self, i: usize) -> &'a [u32] {
        match self.pos_offsets {
            Some(off) => &self.positions[off[i] as usize..off[i + 1] as usize],
            None => &[],
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (DocId, &'a [u32])> + '_ {
        (0..self.docs.len()).map(move |i| (self.docs[i], self.positions(i)))
    }

    /// Positions of the term in `doc`, or `None` when the doc is not listed.
    pub fn positions_in(&self, doc: DocId) -> Option<&'a [u32]> {
        self.docs.binary_search(&doc).ok().map(|i| self.positions(i))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FieldIndex {
    pub kind: FieldKind,
    terms: Vec<String>,
    lookup: HashMap<String, TermOrd>,
    /// `term_start[t]..term_start[t + 1]` indexes `post_docs` for term `t`.
    term_start: Vec<u32>,
    post_docs: Vec<DocId>,
    /// Per posting entry, a range into `positions`. Empty for exact fields.
    pos_start: Vec<u32>,
    positions: Vec<u32>,
    /// `fwd_start[d]..fwd_start[d + 1]` indexes `fwd_terms` for doc `d`.
    fwd_start: Vec<u32>,
    fwd_terms: Vec<TermOrd>,
}

impl FieldIndex {
    pub fn freeze(
        kind: FieldKind,
        postings: &BTreeMap<String, Vec<Posting>>,
        num_docs: u32,
    ) -> Self {
        let mut terms = Vec::with_capacity(postings.len());
        let mut term_start = Vec::with_capacity(postings.len() + 1);
        let mut post_docs = Vec::new();
        let mut pos_start = Vec::new();
        let mut positions = Vec::new();
        term_start.push(0);
        for (term, entries) in postings {
            terms.push(term.clone());
            for p in entries {
                post_docs.push(p.doc);
                if kind.has_positions() {
                    pos_start.push(positions.len() as u32);
                    positions.extend_from_slice(&p.positions);
                }
            }
            term_start.push(post_docs.len() as u32);
        }
        if kind.has_positions() {
            pos_start.push(positions.len() as u32);
        }
        let mut field = FieldIndex {
            kind,
            lookup: HashMap::new(),
            terms,
            term_start,
            post_docs,
            pos_start,
            positions,
            fwd_start: Vec::new(),
            fwd_terms: Vec::new(),
        };
        field.build_lookup();
        field.build_forward(num_docs);
        field
    }

    fn build_lookup(&mut self) {
        self.lookup = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermOrd))
            .collect();
    }

    /// Uninverts the postings into a docs-terms table. Iterating terms in
    /// ordinal order leaves every per-doc list sorted.
    fn build_forward(&mut self, num_docs: u32) {
        let mut counts = vec![0u32; num_docs as usize + 1];
        for &d in &self.post_docs {
            counts[d as usize + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut cursor = counts.clone();
        let mut fwd_terms = vec![0; self.post_docs.len()];
        for t in 0..self.terms.len() {
            for &d in self.docs_of(t as TermOrd) {
                fwd_terms[cursor[d as usize] as usize] = t as TermOrd;
                cursor[d as usize] += 1;
            }
        }
        self.fwd_start = counts;
        self.fwd_terms = fwd_terms;
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn ord(&self, term: &str) -> Option<TermOrd> {
        self.lookup.get(term).copied()
    }

    pub fn term(&self, ord: TermOrd) -> &str {
        &self.terms[ord as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn docs_of(&self, ord: TermOrd) -> &[DocId] {
        let t = ord as usize;
        &self.post_docs[self.term_start[t] as usize..self.term_start[t + 1] as usize]
    }

    pub fn postings(&self, ord: TermOrd) -> PostingsList<'_> {
        let t = ord as usize;
        let (lo, hi) = (
            self.term_start[t] as usize,
            self.term_start[t + 1] as usize,
        );
        PostingsList {
            term: &self.terms[t],
            docs: &self.post_docs[lo..hi],
            pos_offsets: self
                .kind
                .has_positions()
                .then(|| &self.pos_start[lo..=hi]),
            positions: &self.positions,
        }
    }

    pub fn forward(&self, doc: DocId) -> &[TermOrd] {
        let d = doc as usize;
        if d + 1 >= self.fwd_start.len() {
            return &[];
        }
        &self.fwd_terms[self.fwd_start[d] as usize..self.fwd_start[d + 1] as usize]
    }

    /// Rebuilds the mutable postings map, for resuming ingestion on a loaded snapshot.
    pub fn thaw(&self) -> BTreeMap<String, Vec<Posting>> {
        (0..self.terms.len())
            .map(|t| {
                let p = self.postings(t as TermOrd);
                let entries = p
                    .entries()
                    .map(|(doc, pos)| Posting {
                        doc,
                        positions: pos.to_vec(),
                    })
                    .collect();
                (self.terms[t].clone(), entries)
            })
            .collect()
    }

    pub(crate) fn raw_forward(&self) -> (&[u32], &[TermOrd]) {
        (&self.fwd_start, &self.fwd_terms)
    }

    /// Reassembles a field from decoded parts, validating every structural invariant.
    pub(crate) fn from_raw(
        kind: FieldKind,
        postings: BTreeMap<String, Vec<Posting>>,
        fwd_start: Vec<u32>,
        fwd_terms: Vec<TermOrd>,
        num_docs: u32,
    ) -> Result<Self, String> {
        for (term, entries) in &postings {
            if entries.is_empty() {
                return Err(format!("term `{term}` has no postings"));
            }
            if entries.windows(2).any(|w| w[0].doc >= w[1].doc)
                || entries.last().is_some_and(|p| p.doc >= num_docs)
            {
                return Err(format!("postings of `{term}` are not sorted doc ids"));
            }
            if entries
                .iter()
                .any(|p| p.positions.windows(2).any(|w| w[0] >= w[1]))
            {
                return Err(format!("positions of `{term}` are not increasing"));
            }
        }
        let field = FieldIndex::freeze(kind, &postings, num_docs);
        if field.fwd_start != fwd_start || field.fwd_terms != fwd_terms {
            return Err("forward index disagrees with postings".into());
        }
        Ok(field)
    }
}
