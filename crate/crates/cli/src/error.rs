use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] combmem::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for invalid input, 3 for numerical diagnostics, 1 for I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Core(combmem::Error::Diagnostic(_)) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
