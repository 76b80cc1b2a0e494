use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("size mismatch: {what} has {got} entries, expected {expected}")]
    SizeMismatch { what: &'static str, got: usize, expected: usize },

    #[error("inconsistent value: {0}")]
    Inconsistent(String),

    #[error("non-finite energy at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("solve failed at nu = {nu}: {source}")]
    Continuation {
        nu: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid/config mismatch: checkpoint digest {checkpoint}, expected {expected}")]
    DigestMismatch { checkpoint: String, expected: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse { line, reason: reason.into() }
    }
}
