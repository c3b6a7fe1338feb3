use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the localization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation error at t = {time} s: {reason}")]
    Evaluation { time: f64, reason: String },

    #[error("window span [{start}, {end}) s is not covered by the recording (missing {missing})")]
    WindowSpan {
        start: f64,
        end: f64,
        missing: String,
    },

    #[error(
        "window decay never reaches -{threshold_db} dB within half a period; cap the threshold at {reachable_db:.1} dB or use a tapered window"
    )]
    DecayLimit { threshold_db: f64, reachable_db: f64 },

    #[error("requested {requested} bins but only {available} DFT bins are available in [{f_minus}, {f_plus}] Hz")]
    Bins {
        requested: usize,
        available: usize,
        f_minus: f64,
        f_plus: f64,
    },

    #[error("quadrature did not converge after {subdivisions} subdivisions (error estimate {estimate:e}, target {target:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        target: f64,
    },

    #[error("transfer entry (row {row}, column {col}) failed: {source}")]
    Entry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("the L-curve has no corner (curvature never positive); add stabilization noise to the observations")]
    NoCorner,

    #[error("source map is identically zero")]
    EmptyMap,

    #[error("no contour at {level_db} dB encloses ({x}, {z})")]
    NoContour { level_db: f64, x: f64, z: f64 },

    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
