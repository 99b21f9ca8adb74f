use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix contains non-finite entries ({0})")]
    NonFinite(&'static str),

    #[error("least-squares system is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("power iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("source {source_index} collapsed to zero after {attempts} reinitializations")]
    RankCollapse { source_index: usize, attempts: usize },

    #[error("signal has zero energy")]
    ZeroSignal,

    #[error("peak at position {position} is outside the sample grid")]
    PeakOutOfRange { position: f64 },

    #[error("reference sources span a degenerate subspace")]
    DegenerateSpan,

    #[error("vector is identically zero")]
    ZeroVector,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
