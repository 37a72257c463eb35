use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants fall into two families: usage problems (bad arguments) and data
/// problems (malformed files, inconsistent inputs). [`Error::is_usage`] tells
/// them apart so the CLI can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("dimension mismatch: `{first_id}` has dim {expected} but `{second_id}` has dim {found}")]
    Dimension {
        first_id: String,
        second_id: String,
        expected: usize,
        found: usize,
    },

    #[error("record `{id}`, row {row}: norm below 1e-12, cannot normalize")]
    ZeroNorm { id: String, row: usize },

    #[error("record `{id}`, row {row}: non-finite value")]
    NonFinite { id: String, row: usize },

    #[error("record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("record `{0}` has no token metadata")]
    MissingTokens(String),

    #[error("record `{0}` has no patch grid")]
    MissingGrid(String),

    #[error("no OCR tokens for document `{0}`")]
    MissingOcr(String),

    #[error("no qrels entry for query `{0}`")]
    MissingQrels(String),

    #[error("query `{0}` has no relevant documents, ideal DCG is zero")]
    UndefinedIdeal(String),

    #[error(
        "inconsistent background mask on `{doc_id}`: A_total={a_total} A_t={a_t} A_tbg={a_tbg} A_bg={a_bg}"
    )]
    Coverage {
        doc_id: String,
        a_total: u64,
        a_t: u64,
        a_tbg: u64,
        a_bg: u64,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{} queries failed; first: `{}`: {}", .0.len(), .0[0].0, .0[0].1)]
    Batch(Vec<(String, Error)>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True when the failure stems from how the engine was invoked rather
    /// than from the content of its inputs.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}
