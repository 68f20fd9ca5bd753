use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty grid")]
    EmptyGrid,

    #[error("time grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },

    #[error("divergence at t = {t}")]
    Divergence { t: f64 },

    #[error("state dimension mismatch: system has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("lambert_w0 argument {0} outside [-1/e, 0]")]
    LambertDomain(f64),

    #[error("no crossing of e_alpha within horizon {horizon} s")]
    NoCrossing { horizon: f64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("empty window [{from}, {to}]")]
    EmptyWindow { from: f64, to: f64 },

    #[error("derivative bound unavailable for a custom signal")]
    BoundUnavailable,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("presets do not share a signal: `{0}` differs from `{1}`")]
    SignalMismatch(String, String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error in {path:?}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed trajectory file: {0}")]
    MalformedTrajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
