use thiserror::Error;

use crate::system::AtomId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("zero weight at atom {atom} in a system claimed invertible")]
    ZeroWeight { atom: AtomId },

    #[error("weight at atom {atom} is not finite")]
    UnboundedWeight { atom: AtomId },

    #[error("orbit {orbit} is a unilateral chain; the map is not invertible there")]
    NonInvertibleMap { orbit: usize },

    #[error("system is not invertible: {reason}")]
    NonInvertible { reason: String },

    #[error("system is not dissipative: conservative orbits {orbits:?} carry positive mass")]
    NotDissipative { orbits: Vec<usize> },

    #[error("wandering set has zero mass (no dissipative orbits)")]
    EmptyWanderingSet,

    #[error("bounded distortion fails; the shift factor is undefined")]
    DistortionUnbounded,

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("{check} check failed at atom {atom}: deviation {deviation:e}")]
    VerificationFailed {
        check: String,
        atom: AtomId,
        deviation: f64,
    },
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
