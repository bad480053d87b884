use thiserror::Error;

/// Errors produced by the link model, the oracles and the runner.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document that does not match the schema; `path` is
    /// the dotted field path.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// Invalid configuration (geometry, distribution spec, scheme parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix failed a structural check (Hermitian, PSD, square).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
