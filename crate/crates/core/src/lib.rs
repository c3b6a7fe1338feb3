//! Frequency-domain localization of a uniformly moving, single-frequency
//! sound source from microphone-array recordings.
//!
//! The pipeline: [`sim`] produces array recordings, [`spectral`] turns them
//! into windowed DFT observations, [`transfer`] builds the 2.5D transfer
//! matrix from the 2D kernels in [`specfun`], [`inverse`] solves the
//! regularized least-squares problem and [`analysis`] reads the source map.

pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod inverse;
pub mod io;
pub mod quad;
pub mod scenario;
pub mod sim;
pub mod spectral;
pub mod transfer;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
