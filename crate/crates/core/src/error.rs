//! Crate-wide error type.

use std::path::PathBuf;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller passed something unusable (bad arguments, empty grid, ...).
    Usage,
    /// Input data is unreadable, malformed, or insufficient.
    Data,
    /// The solver failed to converge within its iteration cap.
    Convergence,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty column")]
    EmptyColumn,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid corpus at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("class too small to split: {class} has {count} samples")]
    ClassTooSmall { class: &'static str, count: usize },

    #[error("subfile count {k} exceeds negative sample count {negatives}")]
    TooManySubfiles { k: usize, negatives: usize },

    #[error("nu exceeds class-balance bound: nu={nu}, bound={bound}")]
    InfeasibleNu { nu: f64, bound: f64 },

    #[error("solver did not converge after {updates} pair updates (KKT residual {residual:.3e})")]
    NoConvergence { updates: u64, residual: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("feature vector is missing slots required by mask {mask}")]
    MissingMaskedSlot { mask: String },

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("no feasible grid cell: every nu value violates the class-balance bound")]
    NoFeasibleCell,

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("too few samples to train: {0}")]
    TooFewSamples(usize),

    #[error("fold count {folds} exceeds minority class size {min_class}")]
    BadFoldCount { folds: usize, min_class: usize },

    #[error("model file: {0}")]
    ModelSchema(String),

    #[error("model version mismatch: found {found}, expected {expected}")]
    ModelVersion { found: u32, expected: u32 },

    #[error("assessment file, line {line}: {message}")]
    Assessment { line: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    /// Which exit-code class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoConvergence { .. } => ErrorClass::Convergence,
            Error::EmptyGrid
            | Error::BadFoldCount { .. }
            | Error::TooManySubfiles { .. }
            | Error::InvalidInput(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
