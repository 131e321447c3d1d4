use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the modem, channel, estimator and decoder stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A sample too close to the origin for its phase to be defined.
    #[error("degenerate sample at index {index}: magnitude {magnitude:e}")]
    DegenerateSample { index: usize, magnitude: f64 },

    #[error("signals do not overlap")]
    NoInterference,

    /// |D| in the phase-pair solution exceeded 1 by more than the clamp tolerance.
    #[error("amplitudes inconsistent with sample energy (D = {d})")]
    InconsistentAmplitudes { d: f64 },

    #[error("energy statistics inconsistent: {0}")]
    InconsistentStatistics(String),

    #[error("transformation threshold {threshold:e} is below the noise floor {floor:e}")]
    UndetectableTransformations { threshold: f64, floor: f64 },

    #[error("degenerate transformation event")]
    DegenerateEvent,

    #[error("ambiguous transformation event (angle {angle})")]
    AmbiguousEvent { angle: f64 },

    #[error("amplitude estimation failed: {0}")]
    EstimationFailed(String),

    #[error("decode failed: {0}")]
    DecodeFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the sweep harness and CLI.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
