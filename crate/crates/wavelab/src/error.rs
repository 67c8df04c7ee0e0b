//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input data (non-positive scale, mismatched grids, bad preset...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A dimensionless parameter fell outside its admissible range.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// NaN/Inf produced where finite values are required.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// The water column height h = 1 + eps*zeta - beta*b dropped below the floor.
    #[error("vanishing depth: min h = {min_h:.6e} at node {location} (floor {floor:.1e})")]
    VanishingDepth {
        min_h: f64,
        location: usize,
        floor: f64,
    },

    /// Iterative elliptic solver failed to reach the target residual.
    #[error("elliptic solver failed to converge: residual {residual:.3e} after {iterations} iterations (target {target:.1e})")]
    SolverFailure {
        residual: f64,
        iterations: usize,
        target: f64,
    },

    /// A time-derivative diagnostic was asked for more history than the record holds.
    #[error("not enough history: need {needed} stored states, have {available}")]
    NotEnoughHistory { needed: usize, available: usize },

    /// Adaptive stepping rejected its way below the minimum step size.
    #[error("stiffness failure: step size {dt:.3e} fell below dt_min {dt_min:.3e} at t = {time:.6}")]
    StiffnessFailure { dt: f64, dt_min: f64, time: f64 },

    /// A regression was requested over too few sweep points.
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    /// Every member of a sweep tripped at t = 0.
    #[error("degenerate sweep: {0}")]
    DegenerateSweep(String),

    /// Configuration file problems (unknown keys, ambiguity, missing files).
    #[error("config error: {0}")]
    Config(String),

    /// I/O failures, annotated with the path and operation.
    #[error("io error while {op} {path}: {source}")]
    Io {
        op: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(op: &'static str, path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            op,
            path: path.into(),
            source,
        }
    }
}
