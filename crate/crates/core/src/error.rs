use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported correlation order r={0} (only 1 and 2 are defined)")]
    UnsupportedOrder(u32),
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
