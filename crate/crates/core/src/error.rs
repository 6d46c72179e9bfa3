//! Error type shared by all modules.

use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite {
        what: String,
        pivot: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pcg breakdown: {0} is not positive definite")]
    Breakdown(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("refinement closure exceeded {budget} bisections")]
    ClosureBudget { budget: usize },

    #[error("hierarchy invariant violated: {0}")]
    Audit(String),

    #[error("level {level} out of range 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("unknown facet {facet} on level {level}")]
    UnknownFacet { level: usize, facet: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("oracle size {dofs} exceeds dense cap {cap}")]
    OracleTooLarge { dofs: usize, cap: usize },

    #[error("incompatible right-hand side: {0}")]
    Incompatible(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Library result alias.
pub type Result<T> = std::result::Result<T, Error>;
