use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke an API contract (length mismatch, missing ride, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: row {row}: {message}")]
    Ingestion { path: PathBuf, row: usize, message: String },

    #[error("travel-time lookup failed: {0}")]
    Lookup(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("lp relaxation failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Strips stage labels and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for data
    /// problems, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Ingestion { .. } | Error::Lookup(_) | Error::Csv(_) | Error::Json(_) => 3,
            _ => 1,
        }
    }
}
