use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Domain` marks a contract violation on an input (a probability outside
/// `(0,1)`, a bet outside the admissible interval, an observation outside
/// `[0,1]`). `NotApplicable` marks a bound evaluator invoked on a branch it
/// does not cover; callers that sweep all branches match on it rather than
/// treating it as a failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
