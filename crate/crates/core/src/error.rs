use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid initial law: {0}")]
    InvalidLaw(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// `Q(2α) = +∞`: the large-deviation asymptotics do not apply.
    #[error("regime unavailable: {0}")]
    RegimeUnavailable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty pool")]
    EmptyPool,

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
