use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("estimator {algorithm} failed on group `{prompt_id}`: {source}")]
    Estimator {
        algorithm: String,
        prompt_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("entry `{node}` references missing parent `{parent}`")]
    DanglingParent { node: String, parent: String },

    #[error("entry `{node}` violates archive invariant: {reason}")]
    EntryInvariant { node: String, reason: String },

    #[error("unknown metric key `{0}`")]
    UnknownMetric(String),

    #[error("metric `{key}` is missing for `{node}`")]
    MissingMetric { key: String, node: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("fixture row `{row}`: {message}")]
    Fixture { row: String, message: String },

    #[error("kernel matrix is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("verification check `{check}` failed: {detail}")]
    Verification { check: String, detail: String },

    #[error("every candidate was filtered during screening")]
    AllCandidatesFiltered,

    #[error("proposer: {0}")]
    Proposer(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Name of the verification check that rejected a candidate, if any.
    pub fn check_name(&self) -> Option<&str> {
        match self {
            Error::Verification { check, .. } => Some(check),
            _ => None,
        }
    }
}
