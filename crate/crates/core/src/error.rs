use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("proposal index {index} out of bounds for {len} solutions")]
    InvalidProposal { index: usize, len: usize },

    #[error("unknown fixture: {0}")]
    UnknownFixture(String),

    #[error("lookahead exceeded its node budget of {limit}")]
    BudgetExceeded { limit: u64 },

    #[error("operation requires a deterministic instance")]
    NotDeterministic,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
