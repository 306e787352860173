use std::io;

use thiserror::Error;

/// Errors produced while parsing datasets, weight files and index files.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {kind} id {id} out of range (limit {limit})")]
    OutOfRange {
        line: usize,
        kind: &'static str,
        id: u64,
        limit: u64,
    },
    #[error("line {line}: duplicate {what}")]
    Duplicate { line: usize, what: String },
    #[error("header declares {declared} entries but {found} were read")]
    CountMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ParseError {
    pub(crate) fn syntax(line: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            msg: msg.into(),
        }
    }
}

/// Errors from the numerical and evaluation routines.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("invalid hyper-parameters: {0}")]
    InvalidHyperParams(String),
    #[error("gram matrix size {n} outside 1..={cap}")]
    GramSize { n: usize, cap: usize },
    #[error("symmetric eigensolver did not converge")]
    EigenNoConvergence,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {predictions} predictions vs {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("K must be at least 1")]
    ZeroK,
}

/// Errors from reading or writing a serialized [`TrainingIndex`](crate::TrainingIndex).
#[derive(Debug, Error)]
pub enum IndexFormatError {
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
