use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("corpus root {0} is not a readable directory")]
    BadCorpusRoot(PathBuf),

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("query is empty after preprocessing")]
    EmptyQuery,

    #[error("invalid {what} file: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown technique `{name}` (valid: {valid})")]
    UnknownTechnique { name: String, valid: String },

    #[error("report inputs disagree: {0}")]
    Mismatch(String),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Internal => 4,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Internal => "internal",
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, reason: impl ToString) -> Self {
        Error::Format {
            what,
            reason: reason.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::UnknownTechnique { .. } | Error::Config(_) => ErrorClass::Usage,
            Error::Serialize(_) => ErrorClass::Internal,
            _ => ErrorClass::Data,
        }
    }
}
