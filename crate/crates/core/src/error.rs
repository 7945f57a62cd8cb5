use thiserror::Error;

/// Errors raised by the simulator and its analysis layers.
///
/// The three variants mirror how a caller is expected to react: fix the
/// arguments, fix the run configuration, or inspect a numerical result
/// that could not be interpreted.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("numerical diagnostic: {0}")]
    Diagnostic(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidArgument(format!($($arg)*)) };
}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Configuration(format!($($arg)*)) };
}

macro_rules! diagnostic {
    ($($arg:tt)*) => { $crate::error::Error::Diagnostic(format!($($arg)*)) };
}

pub(crate) use {config_err, diagnostic, invalid};
