use std::fmt;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An operation was called with input that violates its precondition.
    InvalidInput(String),
    /// A scenario configuration violates a structural invariant.
    Config(String),
    /// A fixed-point intermediate exceeded the 64-bit word.
    Overflow { stage: &'static str },
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Overflow { stage } => {
                write!(f, "fixed-point overflow of the 64-bit word in the {stage} stage")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
