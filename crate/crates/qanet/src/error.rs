use std::fmt::Display;

/// Failures split by who is at fault, which decides the exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad arguments, unreadable or inconsistent input files. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// Anything else, including failures to write outputs. Exit code 1.
    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Input(_) => 2,
            Error::Internal(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Attach context while choosing the error class.
pub trait Context<T> {
    fn input_err(self, what: impl Display) -> Result<T>;
    fn internal_err(self, what: impl Display) -> Result<T>;
}

impl<T, E: Display> Context<T> for std::result::Result<T, E> {
    fn input_err(self, what: impl Display) -> Result<T> {
        self.map_err(|e| Error::Input(format!("{what}: {e}")))
    }

    fn internal_err(self, what: impl Display) -> Result<T> {
        self.map_err(|e| Error::Internal(format!("{what}: {e}")))
    }
}

impl From<qanet_core::nn::NetError> for Error {
    fn from(e: qanet_core::nn::NetError) -> Self {
        use qanet_core::nn::NetError;
        match e {
            NetError::StaleCache(_) => Error::Internal(e.to_string()),
            _ => Error::Input(e.to_string()),
        }
    }
}
