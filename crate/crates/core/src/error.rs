use thiserror::Error;

use crate::model::FixedPointReport;

pub type Result<T, E = GalamError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GalamError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds a configured size cap.
    #[error("resource error: {0}")]
    Resource(String),

    /// A linear solve or iteration could not produce a trustworthy answer.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Root finding did not isolate exactly one interior fixed point.
    #[error("no unique threshold: found {} interior root(s)", .0.roots.len())]
    NoUniqueThreshold(Box<FixedPointReport>),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GalamError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GalamError::Domain(msg.into())
    }
}
