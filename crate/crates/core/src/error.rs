use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Malformed {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("scorer `{scorer}` cannot compare `{representation}` representations")]
    IncompatibleScorer {
        scorer: &'static str,
        representation: &'static str,
    },

    #[error("embedding provider `{provider}` failed: {message}")]
    Provider {
        provider: String,
        message: String,
        retryable: bool,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("query `{query}`: {source}")]
    Query {
        query: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used for CLI exit codes and HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data or configuration supplied by the operator.
    Data,
    /// Something failed while running (I/O, remote provider, internal contract).
    Runtime,
    NotFound,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(source_name: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Malformed {
            source_name: source_name.into(),
            line,
            message: message.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorClass::Data,
            Error::Io { .. } | Error::Provider { .. } | Error::Contract(_) => ErrorClass::Runtime,
            Error::NotFound(_) => ErrorClass::NotFound,
            Error::Query { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn is_retryable(&self) -> bool {
        match self {
            Error::Provider { retryable, .. } => *retryable,
            Error::Query { source, .. } => source.is_retryable(),
            _ => false,
        }
    }
}
