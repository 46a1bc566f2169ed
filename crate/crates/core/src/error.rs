use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure not finite: {0}")]
    MeasureNotFinite(String),

    #[error("measures with an atom at 1 are not supported")]
    AtomAtOne,

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("Grey's condition fails for this measure; {0} is undefined")]
    GreyFails(&'static str),

    #[error("Grey's condition is undecidable numerically for this measure")]
    GreyUndecidable,

    #[error("merge events at equal times ({0})")]
    TiedEventTimes(f64),

    #[error("no mutations on the tree")]
    NoMutations,

    #[error("too few samples: {got} (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
