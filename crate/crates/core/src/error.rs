use thiserror::Error;

/// Errors produced by the walk simulator and its analytic layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A tile outside the pre-allocated environment was requested. The caller
    /// has to regenerate a larger environment.
    #[error("environment exhausted: tile {tile} is outside extent {extent}")]
    EnvironmentExhausted { tile: String, extent: String },

    /// The fractional part hit 0; the trajectory is frozen from here on.
    #[error("stopped process after {steps} steps")]
    StoppedProcess { steps: u64 },

    /// A coordinate of the torus point hit 0 (2D analogue of a stopped process).
    #[error("boundary hit after {steps} steps")]
    BoundaryHit { steps: u64 },

    #[error("malformed environment file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
