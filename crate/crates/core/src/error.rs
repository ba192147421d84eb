//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid distribution at {field}: {reason}")]
    InvalidDistribution { field: String, reason: String },

    #[error("invalid polyhedron at {field}: {reason}")]
    InvalidPolyhedron { field: String, reason: String },

    #[error("support size {size} exceeds cap {cap}")]
    SupportOverflow { size: usize, cap: usize },

    #[error("candidate count {count} exceeds cap {cap}")]
    CandidateCap { count: u128, cap: u128 },

    #[error("polyhedron is empty")]
    EmptyPolyhedron,

    #[error("projection did not converge after {sweeps} sweeps (last change {change:e})")]
    NonConvergence { sweeps: usize, change: f64 },

    #[error("linear program is unbounded")]
    UnboundedLp,

    #[error("linear program is infeasible")]
    InfeasibleLp,

    #[error("face enumeration cap exceeded: {m} constraints > cap {cap}")]
    FaceCapExceeded { m: usize, cap: usize },

    #[error("could not certify a {delta}-net after {rounds} rounds")]
    NetConstructionFailure { delta: f64, rounds: usize },

    #[error("certification failed: {0}")]
    CertificationFailure(String),

    #[error("map is not nonincreasing: f({lo}) = {f_lo} < f({hi}) = {f_hi}")]
    NotMonotone { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("json error in {source_name}: {source}")]
    Json {
        source_name: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
