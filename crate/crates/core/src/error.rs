use thiserror::Error;

/// Errors raised by the library. Variants follow the failure classes of the
/// individual operations; every variant carries a human-readable reason.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, parents or spaces do not match.
    #[error("structural error: {0}")]
    Structural(String),
    /// An element expected to be positive is not.
    #[error("positivity error: {0}")]
    Positivity(String),
    /// An argument is outside the domain of the operation.
    #[error("argument error: {0}")]
    Argument(String),
    /// The requested operator has no block below the cutoff.
    #[error("degenerate operator: {0}")]
    Degenerate(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A supplied unitary equivalence fails its defining identities.
    #[error("witness error: {0}")]
    Witness(String),
    #[error("cutoff error: {0}")]
    Cutoff(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// An internal invariant was violated (signals a bug, not bad input).
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    /// Malformed or contradictory input data.
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! structural {
    ($($arg:tt)*) => { $crate::error::Error::Structural(format!($($arg)*)) };
}
macro_rules! argument {
    ($($arg:tt)*) => { $crate::error::Error::Argument(format!($($arg)*)) };
}
pub(crate) use argument;
pub(crate) use structural;
