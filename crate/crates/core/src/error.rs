use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node count must be at least 1, got {0}")]
    InvalidNodeCount(usize),

    #[error("coarse node {node} (t = {position}) is not a fine node")]
    NonNestedNodes { node: usize, position: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected}, got {found}")]
    GridMismatch { expected: String, found: String },

    #[error("mode {k} out of range 1..={max}")]
    ModeOutOfRange { k: usize, max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid with N = {n} cannot be coarsened down to N = {coarsest}")]
    NotCoarsenable { n: usize, coarsest: usize },

    #[error("multigrid did not converge within {cycles} cycles (relative residual {residual:e})")]
    NotConverged { cycles: usize, residual: f64 },

    #[error("sub-step {substep}: {source}")]
    Substep {
        substep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dense system too large: {unknowns} unknowns (limit {limit})")]
    SizeLimit { unknowns: usize, limit: usize },

    #[error("singular system")]
    Singular,

    #[error("invalid level hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
