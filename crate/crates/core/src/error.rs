use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cube, cell or point lies outside the grid box.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operator or exponent parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// An exponent profile violates a hypothesis of the theory it is used for.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    /// Dyadic level left the supported window.
    #[error("range error: {0}")]
    Range(String),
    /// A computation would exceed its configured budget.
    #[error("resource error: {0}")]
    Resource(String),
    /// Kernel evaluated at a zero offset.
    #[error("singular direction: {0}")]
    Singular(String),
    /// An integral that does not converge.
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("inconsistent data: {0}")]
    Inconsistency(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
