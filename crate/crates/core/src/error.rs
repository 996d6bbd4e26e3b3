use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is out of its legal range.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The supplied data does not satisfy a precondition.
    #[error("invalid data: {0}")]
    Data(String),
    /// A statistic cannot be computed from the supplied inputs.
    #[error("undefined statistic: {0}")]
    Undefined(String),
    /// A serialized artifact could not be read.
    #[error("artifact error: {0}")]
    Artifact(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn data_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Data(msg.into()))
}
