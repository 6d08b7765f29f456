use thiserror::Error;

/// Errors produced by the meta-analysis engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A data file row failed validation. Rows are 1-based and count data
    /// rows, not the header.
    #[error("row {row}, column `{column}`: {reason}")]
    Row {
        row: usize,
        column: String,
        reason: String,
    },

    /// The header of a data file does not match the expected schema.
    #[error("header mismatch: {0}")]
    Header(String),

    /// An operation that requires records received none.
    #[error("no records")]
    Empty,

    /// The sampler could not continue; the message carries diagnostics.
    #[error("sampler error: {0}")]
    Sampler(String),

    /// A persisted chain file or sidecar is malformed.
    #[error("chain format error: {0}")]
    ChainFormat(String),

    /// A chain and a dataset disagree on standardization metadata.
    #[error("standardization mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
