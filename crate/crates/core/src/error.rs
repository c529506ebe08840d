use thiserror::Error;

/// Errors raised by the game, risk, solver and experiment layers.
#[derive(Debug, Error)]
pub enum DraeError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("infeasible probability floor: eps = {eps} with {n} actions (eps * n must be <= 1)")]
    InfeasibleFloor { eps: f64, n: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index {index} out of range for {n} actions")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid configuration: field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("matrix is not symmetric (max |m - m^T| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error(
        "required expected return {requested} exceeds the maximum attainable {max_attainable}"
    )]
    InfeasibleReturn { requested: f64, max_attainable: f64 },

    #[error("frontier error: {0}")]
    Frontier(String),

    #[error("{requested} products give too many portfolios (at most {max} products supported)")]
    TooManyProducts { requested: usize, max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DraeError>;

pub(crate) fn invalid_config(field: &'static str, reason: impl Into<String>) -> DraeError {
    DraeError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
