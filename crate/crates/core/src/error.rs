use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LomError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LomError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("capacity exceeded: {what} is {value}, limit is {limit}")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("{what} out of range: {value} (must be below {limit})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid bit {0:?}: expected '0' or '1'")]
    InvalidBit(char),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing path {}", .0.display())]
    MissingPath(PathBuf),

    #[error(transparent)]
    Idx(#[from] crate::mnist::IdxError),

    #[error(transparent)]
    Checkpoint(#[from] crate::checkpoint::CheckpointError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LomError {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        LomError::Dimension {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LomError::Config(msg.into())
    }
}
