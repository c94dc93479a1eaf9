use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgError};

/// A field value as it arrives on the wire: a single string or a list of strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Text(String),
    List(Vec<String>),
}

impl FieldValue {
    pub fn values(&self) -> &[String] {
        match self {
            FieldValue::Text(s) => std::slice::from_ref(s),
            FieldValue::List(v) => v,
        }
    }
}

impl From<&str> for FieldValue {
    fn from(s: &str) -> Self {
        FieldValue::Text(s.to_string())
    }
}

impl<S: Into<String>> From<Vec<S>> for FieldValue {
    fn from(v: Vec<S>) -> Self {
        FieldValue::List(v.into_iter().map(Into::into).collect())
    }
}

/// One ingested record. Serialized flat, as `{"id": ..., "<field>": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(flatten)]
    pub fields: BTreeMap<String, FieldValue>,
}

impl Document {
    pub fn new(id: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            fields: BTreeMap::new(),
        }
    }

    pub fn with(mut self, field: impl Into<String>, value: impl Into<FieldValue>) -> Self {
        self.fields.insert(field.into(), value.into());
        self
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(value.clone())
            .map_err(|e| SkgError::InvalidRequest(format!("malformed document: {e}")))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(SkgError::EmptyId);
        }
        if self.fields.is_empty() {
            return Err(SkgError::NoFields(self.id.clone()));
        }
        Ok(())
    }
}
