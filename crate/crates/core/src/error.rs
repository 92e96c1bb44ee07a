//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("loss must have shape [1], got {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("log of non-positive value {value}")]
    LogDomain { value: f64 },

    #[error("no gradient recorded for parameter {name} (was backward run?)")]
    MissingGrad { name: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("sinkhorn did not converge: marginal violation {violation:.3e} after {iters} iterations")]
    SinkhornDiverged { violation: f64, iters: usize },

    #[error("transport solver failed to terminate after {0} pivots")]
    SolverStalled(usize),

    #[error("non-finite value in loss term {term} at epoch {epoch}, step {step}")]
    NonFiniteLoss {
        term: &'static str,
        epoch: usize,
        step: usize,
    },

    #[error("checkpoint does not match config: {0}")]
    ConfigMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("bad checkpoint file: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
