use thiserror::Error;

/// Errors surfaced by the solvers and data constructors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle budget exceeded: {size} > {budget}")]
    BudgetExceeded { size: usize, budget: usize },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("problem infeasible: {0}")]
    Infeasible(String),

    #[error("problem unbounded: {0}")]
    Unbounded(String),

    #[error("wrong existence state: {0}")]
    WrongExistence(String),

    #[error(
        "requested slack {requested:.3e} below minimal achievable {minimal:.3e}; \
         enlarge the candidate radius"
    )]
    TruncationRadius { requested: f64, minimal: f64 },

    #[error("missing data: {0}")]
    MissingData(&'static str),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
