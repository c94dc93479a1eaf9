//! Dual per-field indexes over a committed corpus.
//!
//! Every field keeps a terms-docs inverted index (with token positions for text
//! fields) and a docs-terms forward index. An [`IndexSnapshot`] is immutable once
//! published; [`IndexWriter`] stages documents and commits new snapshots.

mod field;
mod writer;

use std::collections::HashMap;

pub use field::{PostingsList, TermOrd};
pub(crate) use field::{FieldIndex, Posting};
pub use writer::{IndexWriter, SnapshotHandle};

use crate::docset::{intersect_sorted, DocId, DocSet};
use crate::error::{Result, SkgError};
use crate::schema::{FieldKind, Schema};

#[derive(Debug, Clone)]
pub struct IndexSnapshot {
    generation: u64,
    schema: Schema,
    external_ids: Vec<String>,
    id_lookup: HashMap<String, DocId>,
    fields: Vec<FieldIndex>,
    all: DocSet,
}

impl IndexSnapshot {
    pub fn empty(schema: Schema) -> Self {
        let fields = schema
            .fields()
            .iter()
            .map(|f| FieldIndex::freeze(f.kind, &Default::default(), 0))
            .collect();
        IndexSnapshot::assemble(0, schema, Vec::new(), fields)
    }

    pub(crate) fn assemble(
        generation: u64,
        schema: Schema,
        external_ids: Vec<String>,
        fields: Vec<FieldIndex>,
    ) -> Self {
        debug_assert_eq!(schema.fields().len(), fields.len());
        let id_lookup = external_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as DocId))
            .collect();
        let all = DocSet::all(external_ids.len() as u32);
        IndexSnapshot {
            generation,
            schema,
            external_ids,
            id_lookup,
            fields,
            all,
        }
    }

    /// Number of commits that produced this snapshot.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn doc_count(&self) -> u32 {
        self.external_ids.len() as u32
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn external_id(&self, doc: DocId) -> Option<&str> {
        self.external_ids.get(doc as usize).map(String::as_str)
    }

    pub fn internal_id(&self, external: &str) -> Option<DocId> {
        self.id_lookup.get(external).copied()
    }

    pub(crate) fn external_ids(&self) -> &[String] {
        &self.external_ids
    }

    pub fn all_docs(&self) -> DocSet {
        self.all.clone()
    }

    pub fn empty_docs(&self) -> DocSet {
        DocSet::empty(self.doc_count())
    }

    pub fn field_kind(&self, field: &str) -> Result<FieldKind> {
        self.schema.kind(field)
    }

    pub(crate) fn field(&self, name: &str) -> Result<&FieldIndex> {
        self.schema
            .fields()
            .iter()
            .position(|f| f.name == name)
            .map(|i| &self.fields[i])
            .ok_or_else(|| SkgError::UnknownField(name.to_string()))
    }

    pub(crate) fn field_at(&self, i: usize) -> &FieldIndex {
        &self.fields[i]
    }

    /// The sorted term dictionary of a field.
    pub fn terms(&self, field: &str) -> Result<&[String]> {
        Ok(self.field(field)?.terms())
    }

    pub fn postings(&self, field: &str, term: &str) -> Result<Option<PostingsList<'_>>> {
        let f = self.field(field)?;
        Ok(f.ord(term).map(|o| f.postings(o)))
    }

    pub fn doc_frequency(&self, field: &str, term: &str) -> Result<usize> {
        Ok(self
            .postings(field, term)?
            .map_or(0, |p| p.doc_frequency()))
    }

    /// Documents containing the (already normalized) `term` in `field`.
    pub fn term_docset(&self, field: &str, term: &str) -> Result<DocSet> {
        let f = self.field(field)?;
        let docs = f.ord(term).map(|o| f.docs_of(o).to_vec()).unwrap_or_default();
        Ok(DocSet::from_sorted(self.doc_count(), docs))
    }

    /// Documents where `terms` occur at consecutive ascending positions.
    pub fn phrase_docset<S: AsRef<str>>(&self, field: &str, terms: &[S]) -> Result<DocSet> {
        let f = self.field(field)?;
        if !f.kind.has_positions() {
            return Err(SkgError::NotAnalyzed(field.to_string()));
        }
        if terms.is_empty() {
            return Err(SkgError::EmptyPhrase);
        }
        let mut lists = Vec::with_capacity(terms.len());
        for t in terms {
            match f.ord(t.as_ref()) {
                Some(o) => lists.push(f.postings(o)),
                None => return Ok(self.empty_docs()),
            }
        }
        if lists.len() == 1 {
            return Ok(DocSet::from_sorted(self.doc_count(), lists[0].docs().to_vec()));
        }
        let mut by_rarity: Vec<&PostingsList<'_>> = lists.iter().collect();
        by_rarity.sort_by_key(|p| p.doc_frequency());
        let mut candidates = by_rarity[0].docs().to_vec();
        for p in &by_rarity[1..] {
            candidates = intersect_sorted(&candidates, p.docs());
        }
        let hits = candidates
            .into_iter()
            .filter(|&doc| phrase_matches(&lists, doc))
            .collect();
        Ok(DocSet::from_sorted(self.doc_count(), hits))
    }

    /// Per-term document counts of `field` within `docs`, via the forward index.
    /// Unordered; only terms with a nonzero count appear.
    pub(crate) fn field_term_counts(&self, field: &str, docs: &DocSet) -> Result<Vec<(TermOrd, u32)>> {
        let f = self.field(field)?;
        Ok(count_terms(f, docs))
    }

    /// Every distinct term of `field` occurring in `docs`, with its containing-doc
    /// count inside `docs`, ordered by count descending then term ascending.
    pub fn enumerate_field_terms(&self, field: &str, docs: &DocSet) -> Result<Vec<(String, u32)>> {
        let f = self.field(field)?;
        let mut counts = count_terms(f, docs);
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(counts
            .into_iter()
            .map(|(o, c)| (f.term(o).to_string(), c))
            .collect())
    }

    /// Distinct terms of `field` in `doc`, sorted.
    pub fn forward_terms(&self, field: &str, doc: DocId) -> Result<Vec<&str>> {
        let f = self.field(field)?;
        Ok(f.forward(doc).iter().map(|&o| f.term(o)).collect())
    }
}

fn phrase_matches(lists: &[PostingsList<'_>], doc: DocId) -> bool {
    let per_term: Option<Vec<&[u32]>> = lists.iter().map(|p| p.positions_in(doc)).collect();
    let Some(per_term) = per_term else {
        return false;
    };
    per_term[0].iter().any(|&start| {
        per_term[1..]
            .iter()
            .enumerate()
            .all(|(i, pos)| pos.binary_search(&(start + i as u32 + 1)).is_ok())
    })
}

fn count_terms(f: &FieldIndex, docs: &DocSet) -> Vec<(TermOrd, u32)> {
    let terms = f.num_terms();
    // A dense tally is cheapest unless the set touches only a sliver of the dictionary.
    if docs.len() * 8 >= terms {
        let mut tally = vec![0u32; terms];
        for d in docs {
            for &o in f.forward(d) {
                tally[o as usize] += 1;
            }
        }
        tally
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(o, c)| (o as TermOrd, c))
            .collect()
    } else {
        let mut tally: HashMap<TermOrd, u32> = HashMap::new();
        for d in docs {
            for &o in f.forward(d) {
                *tally.entry(o).or_insert(0) += 1;
            }
        }
        tally.into_iter().collect()
    }
}
