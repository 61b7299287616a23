use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration document; `path` is the offending key path.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid digit {digit} at position {position}; digits must be 0, 1 or 2")]
    InvalidDigit { digit: u8, position: usize },

    #[error("label {label} out of range for {n_qubits} qubit(s)")]
    LabelOutOfRange { label: usize, n_qubits: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("operation `{op}` is not supported by {kind} models")]
    Unsupported { op: &'static str, kind: &'static str },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("insufficient state coverage: {0}")]
    Coverage(String),

    #[error("{records} records exceed the configured maximum of {max}")]
    TooLarge { records: u128, max: usize },

    #[error("malformed {what} at line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },

    #[error("unsupported {what} format version {found} (expected {expected})")]
    FormatVersion { what: &'static str, found: u32, expected: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
