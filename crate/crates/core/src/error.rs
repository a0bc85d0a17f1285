use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown attribute index {0}")]
    UnknownAttribute(usize),

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("cannot train a classifier on a single class")]
    SingleClass,

    #[error("probability vector invalid: {0}")]
    InvalidProbabilities(String),

    #[error("surrogate fit failed: {0}")]
    DegenerateWeights(String),

    #[error("contingency table is empty")]
    EmptyContingency,

    #[error("rule set mixes target classes {0} and {1}")]
    MixedClasses(usize, usize),

    #[error("bridge transport error (request {request_id}): {message}{}", stderr_suffix(.stderr_tail))]
    Transport {
        request_id: i64,
        message: String,
        stderr_tail: String,
    },

    #[error("bridge adapter error (request {request_id}): {message}")]
    Adapter { request_id: i64, message: String },

    #[error("fingerprint mismatch: report expects {expected}, dataset has {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

fn stderr_suffix(tail: &str) -> String {
    if tail.is_empty() {
        String::new()
    } else {
        format!("; adapter stderr: {tail}")
    }
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage: stage.into(),
                source: Box::new(other),
            },
        }
    }

    /// Whether this is (or wraps) a configuration problem.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
