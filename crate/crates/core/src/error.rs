use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is in the {found:?} basis, operation requires {expected:?}")]
    WrongBasis {
        expected: crate::state::Basis,
        found: crate::state::Basis,
    },

    #[error("momentum {value} outside the grid [{min}, {max}]")]
    MomentumOutOfRange { value: i64, min: i64, max: i64 },

    #[error("qubit index {index} out of range for a {n_q}-qubit register")]
    QubitOutOfRange { index: usize, n_q: u32 },

    #[error("register size mismatch: circuit has {circuit} qubits, state has {state}")]
    RegisterMismatch { circuit: u32, state: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("fit undetermined: {0}")]
    FitUndetermined(String),

    #[error("no spectral peak above the noise floor")]
    NoSignal,

    #[error("unstable fixed point: K = {0} is outside (-4, 0)")]
    UnstableFixedPoint(f64),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
