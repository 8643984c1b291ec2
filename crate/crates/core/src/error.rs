use thiserror::Error;

use crate::numerics::PrecisionMode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("cannot parse '{0}' as a real number")]
    Parse(String),

    #[error("{what} {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("deep-zoom level k={k} needs more precision than {mode} provides (max k={max})")]
    PrecisionConflict { k: u32, mode: PrecisionMode, max: u32 },

    #[error("orbit left the unit interval at step {step} (x = {value})")]
    Escaped { step: u64, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("test not applicable: {0}")]
    NotApplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error classes, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Degenerate,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::Degenerate(_) | Error::NotApplicable(_) => ErrorClass::Degenerate,
            _ => ErrorClass::Validation,
        }
    }
}
