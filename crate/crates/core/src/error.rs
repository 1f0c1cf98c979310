//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by dataset construction, solvers, and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (LIBSVM parsing). Line numbers are 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A feature index exceeded the declared dimensionality.
    #[error("dimension error at line {line}: index {index} exceeds declared dimension {dims}")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        dims: usize,
    },

    /// Vector or matrix shapes do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    /// A dataset violated a CSR or label invariant.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// A partitioning request that cannot be satisfied.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A configuration value outside its legal range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The line search produced a non-finite objective.
    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    /// The merge step was handed an empty sample.
    #[error("empty merge set")]
    EmptyMergeSet,

    /// A single-class operation received rows of both classes.
    #[error("mixed labels: operation requires a single-class dataset")]
    MixedLabels,

    /// A malformed inter-worker message.
    #[error("wire format: {0}")]
    Wire(String),

    /// Underlying I/O failure while reading a text stream.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
