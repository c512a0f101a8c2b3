use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no spectral peak: input has no energy away from DC")]
    NoSpectralPeak,

    #[error("singular normal equations at omega = {omega}")]
    SingularFit { omega: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("infeasible pulse design: {0}")]
    InfeasiblePulse(String),

    #[error("scale unidentifiable: lambda estimate is zero")]
    ScaleUnidentifiable,

    #[error("need {needed} frequency initializations, got {got}")]
    NotEnoughInits { needed: usize, got: usize },

    #[error("malformed config at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("bad matrix file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::ShapeMismatch { expected, got }
    }
}
