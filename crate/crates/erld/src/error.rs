use thiserror::Error;

/// Errors surfaced by the resolution library.
#[derive(Debug, Error)]
pub enum ErldError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("corpus error at line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("duplicate document id {id}: lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("unknown document id: {0}")]
    UnknownDocument(String),

    #[error("cannot merge an empty document list")]
    EmptyMerge,

    #[error("document {0} has an empty word set")]
    EmptyWordSet(String),

    #[error("state is stale: {0}")]
    StaleState(String),

    #[error("state is corrupted: {0}")]
    Corruption(String),

    #[error("state format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("state is locked by another writer: {0}")]
    Locked(String),

    #[error("state invariant violated: {0}")]
    InvariantViolation(String),

    #[error("prediction does not cover the gold standard: {0}")]
    CoverageMismatch(String),
}

pub type Result<T> = std::result::Result<T, ErldError>;
