use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order {0} outside supported range 1..={max}", max = crate::symtensor::MAX_ORDER)]
    OrderOutOfRange(usize),

    #[error("invalid multi-index {0:?}: {1}")]
    InvalidIndex(Vec<usize>, &'static str),

    #[error("invalid budget: {0}")]
    InvalidBudget(&'static str),

    #[error("no decomposition of rank <= {rank} within tolerance (best residual {residual:.3e})")]
    Infeasible { rank: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty series")]
    EmptySeries,

    #[error("stage search exhausted at {max_stage}: {detail}")]
    StageExhausted { max_stage: usize, detail: String },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
