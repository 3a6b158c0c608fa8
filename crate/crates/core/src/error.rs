use thiserror::Error;

/// Errors raised by graph construction, metric computation and the
/// linear-algebra kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge {edge} has non-positive or non-finite length {length}")]
    NonPositiveLength { edge: usize, length: f64 },

    #[error("graph is disconnected: vertex {vertex} is unreachable from vertex 0")]
    Disconnected { vertex: usize },

    #[error("bad index: {0}")]
    BadIndex(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("bad point: {0}")]
    BadPoint(String),

    #[error("matrix is not positive definite: pivot {index} is {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("graph Laplacian is singular (refined graph is disconnected)")]
    SingularLaplacian,

    #[error("edge lengths are not uniform: edge {edge} has length {length}, expected {expected}")]
    NonUniformLengths { edge: usize, length: f64, expected: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point set is not admissible: {0}")]
    NotAdmissible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::SingularLaplacian
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
