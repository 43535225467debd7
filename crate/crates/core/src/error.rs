use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("prime {0} is too large (must be below 2^31)")]
    PrimeTooLarge(u64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid of {what} needs {cells} cells, limit is {limit}")]
    GuardExceeded {
        what: &'static str,
        cells: u128,
        limit: u64,
    },

    #[error("index range overflow: {0}^{1} cells")]
    GridOverflow(u64, usize),

    #[error("invalid variety: {0}")]
    InvalidVariety(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("variety has no points over F_{0}")]
    EmptyVariety(u64),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
