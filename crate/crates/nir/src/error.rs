//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("shape conflict on {node}.{port}: inferred {first:?} and {second:?}")]
    ShapeConflict {
        node: String,
        port: String,
        first: Vec<usize>,
        second: Vec<usize>,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported format version `{0}`")]
    Version(String),
    #[error("cycle without state through nodes {0:?}")]
    CycleWithoutState(Vec<String>),
    #[error("primitive kind `{0}` has no continuous dynamics")]
    NonOdeKind(String),
    #[error("primitive kind `{0}` is not stateless")]
    NonStatelessKind(String),
    #[error("division by zero in {0}")]
    DivisionByZero(String),
    #[error("unsatisfiable constraint: {0}")]
    UnsatisfiableConstraint(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
