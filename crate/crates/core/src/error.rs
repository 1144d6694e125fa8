use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the tensor, training and data layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("dense tensor with {entries} entries exceeds the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("exponent {exponent} of variable x{var} exceeds degree {degree}")]
    DegreeExceeded {
        var: usize,
        exponent: usize,
        degree: usize,
    },

    #[error("duplicate monomial {0:?}")]
    DuplicateMonomial(Vec<usize>),

    #[error("polynomial syntax: {0}")]
    PolySyntax(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("bad IDX file {path}: {msg}")]
    Idx { path: PathBuf, msg: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unsupported model file version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
