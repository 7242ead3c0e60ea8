use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("object {id}: {reason}")]
    InvalidObject { id: u64, reason: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("signature length mismatch: {left} vs {right} bits")]
    SignatureLength { left: usize, right: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("index file: {0}")]
    IndexFormat(String),
    #[error("instance too large for brute force: {size} > {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("no candidates found for the query")]
    NoCandidates,
    #[error("object {0} is not among the shown candidates")]
    NotShown(u64),
    #[error("unknown object {0}")]
    UnknownObject(u64),
    #[error("inconsistent feedback: {0}")]
    InconsistentFeedback(String),
    #[error("session is in phase {0:?}, operation not allowed")]
    WrongPhase(crate::session::Phase),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
