use std::fmt;

/// Errors surfaced by the pricing library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid market, grid or scheme configuration.
    Config(String),
    /// An argument outside a function's mathematical domain.
    Domain(String),
    /// Too few observations for the requested regression.
    InsufficientData { needed: usize, got: usize },
    /// A model was queried for a timestep it was never fitted at.
    State(String),
    /// Asset dimension not supported by the requested method.
    UnsupportedDimension(usize),
    /// A numerical procedure failed to produce a usable result.
    Numeric(String),
    /// File I/O failure, tagged with the offending path.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed} observations, got {got}")
            }
            Error::State(msg) => write!(f, "state error: {msg}"),
            Error::UnsupportedDimension(d) => {
                write!(f, "unsupported asset dimension: {d}")
            }
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: configuration problems exit 2,
    /// numerical problems 3, I/O problems 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}
