use thiserror::Error;

pub type Result<T> = std::result::Result<T, QcpError>;

#[derive(Debug, Error)]
pub enum QcpError {
    #[error("cannot step a terminal state")]
    TerminalState,

    #[error("invalid joint action: {0}")]
    InvalidJointAction(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("invalid mixture model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no candidate component count could be fitted")]
    NoCandidateFitted,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
