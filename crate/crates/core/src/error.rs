use thiserror::Error;

pub type Result<T, E = SkgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SkgError {
    #[error("document id `{0}` already exists")]
    DuplicateId(String),

    #[error("document id must be a non-empty string")]
    EmptyId,

    #[error("document `{0}` has no fields")]
    NoFields(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("field `{0}` is not an analyzed text field")]
    NotAnalyzed(String),

    #[error("phrase must contain at least one term")]
    EmptyPhrase,

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("foreground document set is empty")]
    EmptyForeground,

    #[error("denominator document set is empty")]
    EmptyDenominator,

    #[error("traversal depth {depth} exceeds the configured cap of {cap}")]
    DepthLimit { depth: usize, cap: usize },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("snapshot format version {found} is not supported (expected {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SkgError {
    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> Self {
        SkgError::Syntax {
            position,
            message: message.into(),
        }
    }
}
