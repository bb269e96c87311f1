use std::path::PathBuf;

use crate::dataset::Channel;

/// Which side of an id join was missing a partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinSide {
    Embeddings,
    Labels,
}

impl std::fmt::Display for JoinSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JoinSide::Embeddings => f.write_str("embeddings"),
            JoinSide::Labels => f.write_str("labels"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("missing required column {0:?}")]
    MissingColumn(String),

    #[error("id {id:?} has no matching record in {missing_from}")]
    UnmatchedId { id: String, missing_from: JoinSide },

    #[error("no agreement column was loaded")]
    NoAgreementColumn,

    #[error("label channel {0} is not available for every instance")]
    MissingChannel(Channel),

    #[error("training set has no instances of class {0}")]
    MissingClass(u8),

    #[error("degenerate lens {lens}: {reason}")]
    DegenerateLens { lens: String, reason: String },

    #[error("lens {0} was not fitted on the training statistics")]
    UnfittedLens(String),

    #[error("zero-norm vector at row {row}")]
    ZeroNorm { row: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(row: usize, message: impl Into<String>) -> Self {
        Error::Row {
            row,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
