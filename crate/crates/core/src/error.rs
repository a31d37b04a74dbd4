use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A token bundle does not lie on the reserve curve it is claimed to.
    #[error("bundle ({x}, {y}) is not on the reserve curve of {units} units over [{lower}, {upper}]")]
    OffCurve { x: f64, y: f64, units: f64, lower: f64, upper: f64 },
    /// A price move spans more than one bucket where a single-bucket move is required.
    #[error("contract move {from} -> {to} spans more than one bucket")]
    MultiBucketMove { from: f64, to: f64 },
    /// A pool invariant does not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("no position {0} in pool")]
    NotFound(String),
    /// Malformed configuration or input file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
