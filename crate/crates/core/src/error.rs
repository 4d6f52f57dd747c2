use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or geometry.
    #[error("configuration error: {0}")]
    Config(String),

    /// Config-file problem tied to a source line.
    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    /// Caller violated a domain-tag or shape contract.
    #[error("logic error: {0}")]
    Logic(String),

    /// NaN, overflow or an unresolvable numerical quantity.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Not enough samples for the requested estimate.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigLine { .. } => 1,
            _ => 2,
        }
    }
}
