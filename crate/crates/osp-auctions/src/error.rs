use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("bundle does not fit the item universe: {0}")]
    Bundle(String),
    #[error("{what} exceeds cap: {size} > {cap}")]
    CapExceeded {
        what: &'static str,
        size: u128,
        cap: u128,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("strategy error: {0}")]
    Strategy(String),
    #[error("verification error: {0}")]
    Verify(String),
    #[error("mechanism error: {0}")]
    Mechanism(String),
    #[error("experiment error: {0}")]
    Experiment(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn cap(what: &'static str, size: u128, cap: u128) -> Self {
        Error::CapExceeded { what, size, cap }
    }
}
