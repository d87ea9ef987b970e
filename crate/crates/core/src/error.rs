use thiserror::Error;

/// Errors raised by the simulation and verification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intensity model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {time} outside the window [0, {horizon}]")]
    TimeOutsideWindow { time: f64, horizon: f64 },

    #[error("an atom already sits at time {0} with a different mark")]
    DuplicateTime(f64),

    #[error("atoms must carry a nonzero mark")]
    ZeroMark,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("non-finite derivative at atoms {atoms:?}")]
    NonFinite { atoms: Vec<usize> },

    #[error("series radius violated: {0}")]
    Radius(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
