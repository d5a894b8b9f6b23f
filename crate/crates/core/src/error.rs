use std::io;

use thiserror::Error;

/// Errors raised anywhere in the recommendation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("corpus is empty after filtering")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("negative pool exhausted for {context}: needed {needed}, eligible {eligible}")]
    PoolExhausted {
        context: String,
        needed: usize,
        eligible: usize,
    },

    #[error("non-finite loss at example {example}: {detail}")]
    NonFinite { example: usize, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("scoring failed at click {click}: {source}")]
    Scoring {
        click: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure category, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => ErrorClass::Config,
            Error::NonFinite { .. } => ErrorClass::Numerical,
            Error::Io(_)
            | Error::Parse { .. }
            | Error::EmptyCorpus
            | Error::Format(_)
            | Error::PoolExhausted { .. }
            | Error::Contract(_) => ErrorClass::Data,
            Error::Scoring { source, .. } => source.class(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

/// Opens a file, naming the path in the error.
pub fn open_file(path: impl AsRef<std::path::Path>) -> Result<std::fs::File> {
    let path = path.as_ref();
    std::fs::File::open(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
