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

    #[error("{path}:{line}: malformed JSON: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("document {id}: {}", violations.join("; "))]
    Validation { id: String, violations: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient non-spoiler documents: {spoiler} spoiler vs {clean} non-spoiler")]
    InsufficientNegatives { spoiler: usize, clean: usize },

    #[error("unbalanced spoiler delimiter at byte {offset}: {message}")]
    UnbalancedMarkup { offset: usize, message: String },

    #[error("alignment inconsistency: {0}")]
    Alignment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("non-finite loss {loss} at step {step} (lr {lr:e}, batch {batch})")]
    NonFiniteLoss {
        loss: f64,
        step: usize,
        lr: f64,
        batch: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
