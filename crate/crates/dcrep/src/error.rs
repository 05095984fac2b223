use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size out of range: {0}")]
    Size(String),
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("matrix is singular or not positive definite")]
    Singular,
    #[error("marginals differ: {0}")]
    UnequalMarginals(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of an algorithm rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn range<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Range(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
