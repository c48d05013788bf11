use thiserror::Error;

use crate::bilp::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown gateway layout `{0}` (expected single-center, two-gn, three-gn, four-gn)")]
    UnknownLayout(String),

    #[error("program too large for exhaustive search: {vars} variables (limit {limit})")]
    TooLarge { vars: usize, limit: usize },

    /// The jammed link would be better than the clear one, which the
    /// linearized equilibrium program cannot represent.
    #[error("association penalty a[{sensor}][{gateway}] = {value} is positive")]
    PositivePenalty {
        sensor: usize,
        gateway: usize,
        value: f64,
    },

    #[error("solver stopped with status {status:?} after {nodes} nodes")]
    Solver { status: SolveStatus, nodes: u64 },

    #[error("equilibrium inconsistent: {0}")]
    Inconsistent(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
