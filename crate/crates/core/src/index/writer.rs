use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use parking_lot::RwLock;

use super::{FieldIndex, IndexSnapshot, Posting};
use crate::analysis::{analyze_values, Token};
use crate::docset::DocId;
use crate::document::Document;
use crate::error::{Result, SkgError};
use crate::schema::Schema;

/// Shared pointer to the most recently committed snapshot.
///
/// Readers clone the inner `Arc` and keep using it for as long as they like; a
/// commit swaps the pointer without touching snapshots already handed out.
#[derive(Debug, Clone)]
pub struct SnapshotHandle {
    current: Arc<RwLock<Arc<IndexSnapshot>>>,
}

impl SnapshotHandle {
    fn new(snapshot: Arc<IndexSnapshot>) -> Self {
        SnapshotHandle {
            current: Arc::new(RwLock::new(snapshot)),
        }
    }

    pub fn current(&self) -> Arc<IndexSnapshot> {
        self.current.read().clone()
    }

    fn publish(&self, snapshot: Arc<IndexSnapshot>) {
        *self.current.write() = snapshot;
    }
}

struct StagedDoc {
    id: String,
    fields: Vec<(usize, Vec<Token>)>,
}

/// Single writer: stages documents and atomically publishes snapshots.
pub struct IndexWriter {
    schema: Schema,
    pending_schema: Schema,
    external_ids: Vec<String>,
    known_ids: HashSet<String>,
    postings: Vec<BTreeMap<String, Vec<Posting>>>,
    pending: Vec<StagedDoc>,
    pending_ids: HashSet<String>,
    generation: u64,
    handle: SnapshotHandle,
}

impl IndexWriter {
    pub fn new(schema: Schema) -> Self {
        let snapshot = Arc::new(IndexSnapshot::empty(schema.clone()));
        IndexWriter {
            postings: vec![BTreeMap::new(); schema.fields().len()],
            pending_schema: schema.clone(),
            schema,
            external_ids: Vec::new(),
            known_ids: HashSet::new(),
            pending: Vec::new(),
            pending_ids: HashSet::new(),
            generation: 0,
            handle: SnapshotHandle::new(snapshot),
        }
    }

    /// Resumes writing on top of an existing snapshot, e.g. one loaded from disk.
    pub fn from_snapshot(snapshot: Arc<IndexSnapshot>) -> Self {
        let schema = snapshot.schema().clone();
        let postings = (0..schema.fields().len())
            .map(|i| snapshot.field_at(i).thaw())
            .collect();
        let external_ids = snapshot.external_ids().to_vec();
        IndexWriter {
            known_ids: external_ids.iter().cloned().collect(),
            external_ids,
            postings,
            pending_schema: schema.clone(),
            schema,
            pending: Vec::new(),
            pending_ids: HashSet::new(),
            generation: snapshot.generation(),
            handle: SnapshotHandle::new(snapshot),
        }
    }

    pub fn handle(&self) -> SnapshotHandle {
        self.handle.clone()
    }

    pub fn snapshot(&self) -> Arc<IndexSnapshot> {
        self.handle.current()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Stages a document and returns the internal id it will receive on commit.
    pub fn add_document(&mut self, doc: &Document) -> Result<DocId> {
        doc.validate()?;
        if self.known_ids.contains(&doc.id) || self.pending_ids.contains(&doc.id) {
            return Err(SkgError::DuplicateId(doc.id.clone()));
        }
        let mut schema = self.pending_schema.clone();
        let mut fields = Vec::with_capacity(doc.fields.len());
        for (name, value) in &doc.fields {
            let kind = schema.resolve_for_ingest(name)?;
            let idx = schema.ordinals()[name.as_str()];
            fields.push((idx, analyze_values(value.values(), kind)));
        }
        self.pending_schema = schema;
        self.pending_ids.insert(doc.id.clone());
        let id = (self.external_ids.len() + self.pending.len()) as DocId;
        self.pending.push(StagedDoc {
            id: doc.id.clone(),
            fields,
        });
        Ok(id)
    }

    /// Discards everything staged since the last commit.
    pub fn rollback(&mut self) {
        self.pending.clear();
        self.pending_ids.clear();
        self.pending_schema = self.schema.clone();
    }

    /// Publishes staged documents as a new snapshot. With nothing staged the
    /// current snapshot is returned unchanged.
    pub fn commit(&mut self) -> Arc<IndexSnapshot> {
        if self.pending.is_empty() {
            return self.handle.current();
        }
        self.schema = self.pending_schema.clone();
        self.postings.resize_with(self.schema.fields().len(), BTreeMap::new);
        self.pending_ids.clear();
        for staged in std::mem::take(&mut self.pending) {
            let doc = self.external_ids.len() as DocId;
            for (field, tokens) in staged.fields {
                let mut per_term: BTreeMap<String, Vec<u32>> = BTreeMap::new();
                for t in tokens {
                    per_term.entry(t.term).or_default().push(t.position);
                }
                let map = &mut self.postings[field];
                for (term, mut positions) in per_term {
                    positions.sort_unstable();
                    positions.dedup();
                    if !self.schema.fields()[field].kind.has_positions() {
                        positions.clear();
                    }
                    map.entry(term).or_default().push(Posting { doc, positions });
                }
            }
            self.known_ids.insert(staged.id.clone());
            self.external_ids.push(staged.id);
        }
        self.generation += 1;
        let num_docs = self.external_ids.len() as u32;
        let fields = self
            .schema
            .fields()
            .iter()
            .zip(&self.postings)
            .map(|(f, p)| FieldIndex::freeze(f.kind, p, num_docs))
            .collect();
        let snapshot = Arc::new(IndexSnapshot::assemble(
            self.generation,
            self.schema.clone(),
            self.external_ids.clone(),
            fields,
        ));
        self.handle.publish(snapshot.clone());
        snapshot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FieldKind, FieldSchema};

    fn schema() -> Schema {
        Schema::new([
            FieldSchema::new("skills", FieldKind::ExactString),
            FieldSchema::new("keywords", FieldKind::AnalyzedText),
        ])
        .unwrap()
    }

    #[test]
    fn staged_docs_are_invisible_until_commit() {
        let mut w = IndexWriter::new(schema());
        let id = w
            .add_document(&Document::new("d1").with("skills", vec!["java"]))
            .unwrap();
        assert_eq!(id, 0);
        assert_eq!(w.snapshot().doc_count(), 0);
        let snap = w.commit();
        assert_eq!(snap.doc_count(), 1);
        assert_eq!(snap.term_docset("skills", "java").unwrap().to_vec(), vec![0]);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut w = IndexWriter::new(schema());
        let d = Document::new("d1").with("skills", vec!["java"]);
        w.add_document(&d).unwrap();
        assert!(matches!(w.add_document(&d), Err(SkgError::DuplicateId(_))));
        w.commit();
        assert!(matches!(w.add_document(&d), Err(SkgError::DuplicateId(_))));
    }

    #[test]
    fn closed_schema_rejects_unknown_fields() {
        let mut w = IndexWriter::new(schema());
        let err = w.add_document(&Document::new("d1").with("color", "red"));
        assert!(matches!(err, Err(SkgError::UnknownField(_))));
    }

    #[test]
    fn open_schema_grows_on_commit_only() {
        let mut w = IndexWriter::new(schema().open(FieldKind::ExactString));
        w.add_document(&Document::new("d1").with("color", "Red")).unwrap();
        w.rollback();
        assert!(w.commit().field_kind("color").is_err());
        w.add_document(&Document::new("d1").with("color", "Red")).unwrap();
        let snap = w.commit();
        assert_eq!(snap.term_docset("color", "red").unwrap().len(), 1);
    }

    #[test]
    fn empty_commit_keeps_snapshot_and_old_readers_survive() {
        let mut w = IndexWriter::new(schema());
        w.add_document(&Document::new("d1").with("skills", vec!["java"]))
            .unwrap();
        let first = w.commit();
        let same = w.commit();
        assert!(Arc::ptr_eq(&first, &same));
        w.add_document(&Document::new("d2").with("skills", vec!["java"]))
            .unwrap();
        let second = w.commit();
        assert_eq!(first.term_docset("skills", "java").unwrap().len(), 1);
        assert_eq!(second.term_docset("skills", "java").unwrap().len(), 2);
        assert_eq!(w.handle().current().generation(), second.generation());
    }

    #[test]
    fn resume_from_snapshot() {
        let mut w = IndexWriter::new(schema());
        w.add_document(&Document::new("d1").with("keywords", "java engineer"))
            .unwrap();
        let snap = w.commit();
        let mut w2 = IndexWriter::from_snapshot(snap);
        assert!(w2
            .add_document(&Document::new("d1").with("skills", vec!["x"]))
            .is_err());
        w2.add_document(&Document::new("d2").with("keywords", "java engineer"))
            .unwrap();
        let s2 = w2.commit();
        assert_eq!(
            s2.phrase_docset("keywords", &["java", "engineer"]).unwrap().len(),
            2
        );
    }
}
