//! Field schema: which fields are indexed and how their values are analyzed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Lowercased, split on non-alphanumeric characters, positions recorded.
    AnalyzedText,
    /// Whole value lowercased into a single term, no positions.
    ExactString,
}

impl FieldKind {
    pub fn has_positions(self) -> bool {
        matches!(self, FieldKind::AnalyzedText)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
}

impl FieldSchema {
    pub fn new(name: impl Into<String>, kind: FieldKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Schema file layout:
///
/// ```json
/// { "fields": [ { "name": "skills", "kind": "exact_string" } ], "closed": true }
/// ```
///
/// An open schema registers unknown fields on first use with `default_kind`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    fields: Vec<FieldSchema>,
    #[serde(default = "default_closed")]
    closed: bool,
    #[serde(default = "default_kind")]
    default_kind: FieldKind,
}

fn default_closed() -> bool {
    true
}

fn default_kind() -> FieldKind {
    FieldKind::ExactString
}

impl Schema {
    pub fn new(fields: impl IntoIterator<Item = FieldSchema>) -> Result<Self> {
        let mut schema = Schema {
            fields: Vec::new(),
            closed: true,
            default_kind: default_kind(),
        };
        for field in fields {
            schema.push(field)?;
        }
        Ok(schema)
    }

    pub fn open(mut self, default_kind: FieldKind) -> Self {
        self.closed = false;
        self.default_kind = default_kind;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Schema = serde_json::from_str(text)
            .map_err(|e| SkgError::InvalidRequest(format!("schema: {e}")))?;
        // Re-validate through `new` so duplicates are rejected.
        let mut schema = Schema::new(raw.fields)?;
        schema.closed = raw.closed;
        schema.default_kind = raw.default_kind;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schema serializes")
    }

    fn push(&mut self, field: FieldSchema) -> Result<()> {
        if field.name.is_empty() || field.name == "id" {
            return Err(SkgError::InvalidRequest(format!(
                "invalid field name `{}`",
                field.name
            )));
        }
        if self.get(&field.name).is_some() {
            return Err(SkgError::InvalidRequest(format!(
                "field `{}` declared twice",
                field.name
            )));
        }
        self.fields.push(field);
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn fields(&self) -> &[FieldSchema] {
        &self.fields
    }

    pub fn get(&self, name: &str) -> Option<&FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn kind(&self, name: &str) -> Result<FieldKind> {
        self.get(name)
            .map(|f| f.kind)
            .ok_or_else(|| SkgError::UnknownField(name.to_string()))
    }

    /// Resolves a field for ingestion, registering it when the schema is open.
    pub(crate) fn resolve_for_ingest(&mut self, name: &str) -> Result<FieldKind> {
        if let Some(f) = self.get(name) {
            return Ok(f.kind);
        }
        if self.closed {
            return Err(SkgError::UnknownField(name.to_string()));
        }
        let kind = self.default_kind;
        self.push(FieldSchema::new(name, kind))?;
        Ok(kind)
    }

    /// Field name to position in `fields()`.
    pub(crate) fn ordinals(&self) -> BTreeMap<&str, usize> {
        self.fields
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.as_str(), i))
            .collect()
    }
}
