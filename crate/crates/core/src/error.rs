use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the corpus pipeline, the samplers, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty corpus: all documents were filtered out")]
    EmptyCorpus,

    #[error("malformed {what} in {path} at line {line}: {detail}")]
    MalformedFile {
        what: &'static str,
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("corpus directory {0} is inconsistent: {1}")]
    CorruptCorpus(PathBuf, String),

    #[error("model directory {0} is missing {1}")]
    MissingModelFile(PathBuf, &'static str),

    #[error("document sampling failed for topic {topic}: {detail}")]
    Sampling { topic: usize, detail: String },
}

impl Error {
    /// Wrap an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
