use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Operation needs ±1 spins but received real values (or vice versa).
    #[error("spin kind mismatch: {0}")]
    Kind(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("lattice side {side} is not divisible by {divisor}")]
    Divisibility { side: usize, divisor: usize },

    #[error("state space too large for exact enumeration: {units} units (limit {limit})")]
    TooLarge { units: usize, limit: usize },

    #[error("singular normal equations")]
    Singular,

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    /// Malformed dataset or checkpoint bytes.
    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::Dimension { expected, got }
    }
}
