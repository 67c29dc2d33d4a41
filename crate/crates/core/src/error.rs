use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (bad ids, negative counts,
    /// caps exceeded, infeasible distribution parameters).
    #[error("validation error: {0}")]
    Validation(String),

    /// The estimator is undefined for the supplied data, e.g. no
    /// credentialed respondents.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// MCMC could not find a finite starting point.
    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn estimation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Estimation(msg.into()))
}
