use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("factorization of {operator} failed")]
    Factorization { operator: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
