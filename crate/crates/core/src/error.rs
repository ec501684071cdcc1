//! Error types for the tracking library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackingError {
    /// Every hypothesis weight collapsed to −∞ during normalization.
    #[error("degenerate posterior: all hypothesis weights are zero")]
    DegeneratePosterior,

    /// A state sits exactly at the sensor origin; range and azimuth are undefined.
    #[error("singular geometry: target state at zero range")]
    SingularGeometry,

    /// The antenna gain vanishes at the requested azimuth.
    #[error("target outside gain support: G = 0 at azimuth {azimuth_rad} rad")]
    OutOfBeam { azimuth_rad: f64 },

    /// Every particle of a track carries zero pseudo-likelihood.
    #[error("numerically dead track: pseudo-likelihood vanished for every particle")]
    DeadTrack,

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cube format error: {0}")]
    CubeFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrackingError>;
