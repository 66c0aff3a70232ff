use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point violates constraint row {row} by {violation:.3e}")]
    InfeasiblePoint { row: usize, violation: f64 },

    #[error("face enumeration over {rows} constraint rows exceeds the cap of {cap}")]
    FaceBudgetExceeded { rows: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigensolver(String),

    #[error("secular root finder did not converge after {iterations} bisection steps")]
    RootFinder { iterations: usize },

    #[error("no feasible candidate found while enumerating faces")]
    NoFeasibleCandidate,

    #[error("regularized subproblem is unbounded below for every multiplier tried (last {lambda:.3e})")]
    Unbounded { lambda: f64 },

    #[error("contraction loop exceeded {cap} subproblem solves")]
    ContractCap { cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("trace schema version {found} is not supported (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
