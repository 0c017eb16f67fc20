use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate weight: floor({delta} * {m}) = 0")]
    DegenerateWeight { delta: String, m: u64 },

    #[error("infeasible: {what} needs ~{estimate:.3e} operations (limit {limit:.3e})")]
    Infeasible { what: String, estimate: f64, limit: f64 },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
