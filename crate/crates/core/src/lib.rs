//! Semantic knowledge graph engine.
//!
//! Documents are indexed into per-field inverted and forward indexes. Graph nodes
//! are materialized at query time as document sets, edges are their
//! intersections, and edge weights come from corpus statistics over a
//! foreground/background pair. See [`traversal`] for the multi-level query API.

pub mod analysis;
pub mod docset;
pub mod document;
pub mod error;
pub mod index;
pub mod persist;
pub mod query;
pub mod schema;
pub mod scoring;
pub mod traversal;

pub use docset::{DocId, DocSet};
pub use document::{Document, FieldValue};
pub use error::{Result, SkgError};
pub use index::{IndexSnapshot, IndexWriter, PostingsList, SnapshotHandle};
pub use persist::{load_snapshot, save_snapshot};
pub use query::{evaluate, materialize, parse_query, MaterializedNode, QueryExpr};
pub use schema::{FieldKind, FieldSchema, Schema};
pub use scoring::{EdgeScore, PathState, ScorerKind, ScoringContext};
pub use traversal::{
    traverse, LevelResult, NodeSpec, ScoredValue, TraversalOptions, TraversalRequest, TraversalResponse, Traverser,
};
