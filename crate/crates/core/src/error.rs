use thiserror::Error;

/// Errors raised by the solvers and their inputs.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user configuration (counts, extents, boundary specs, basis counts).
    #[error("configuration error: {0}")]
    Config(String),
    /// A parameter lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed input text.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// A structurally well-formed mesh violates an invariant.
    #[error("mesh validation error: {0}")]
    Validation(String),
    /// Geometric incompatibility between meshes.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Coefficient data out of range.
    #[error("data error: {0}")]
    Data(String),
    /// A caller broke an operation contract (dimensions, missing history).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Factorization or solve failure.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
