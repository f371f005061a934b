use thiserror::Error;

use crate::flownet::NetworkError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("logistic fit: {0}")]
    Logistic(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unknown unit id `{0}`")]
    UnknownId(String),
    #[error("enumeration too large: {0} candidates exceeds guard")]
    EnumerationTooLarge(u128),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
