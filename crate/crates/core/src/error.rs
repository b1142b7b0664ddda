use std::io;
use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("I/O error: {0}")]
    RawIo(#[from] io::Error),

    #[error("{what}, line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("corpus is empty after filtering with min_count={min_count}")]
    EmptyCorpus { min_count: u64 },

    #[error("co-occurrence count overflow at pair ({w}, {c})")]
    CountOverflow { w: u32, c: u32 },

    #[error("co-occurrence table is empty")]
    EmptyTable,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown word `{0}`")]
    UnknownWord(String),

    #[error("context vectors are required but absent")]
    MissingContextVectors,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("refusing to materialize a dense {dim}x{dim} matrix (limit {limit})")]
    TooLarge { dim: usize, limit: usize },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("{0}")]
    Retrieval(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            what,
            line,
            msg: msg.into(),
        }
    }
}
