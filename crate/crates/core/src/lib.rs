//! Simulation of query algorithms against a Grover oracle that faults with
//! probability `p`, together with executable checks of the progress-measure
//! argument showing such an oracle admits no quantum speed-up.
//!
//! Module map:
//! - [`state`], [`linalg`], [`rng`]: state types, spectra, random streams.
//! - [`oracle`]: perfect and faulty oracles, channel decomposition.
//! - [`algorithms`]: Grover, Haar-random and flagged-search algorithms.
//! - [`evolution`]: exact density evolution, trajectories, hitting times.
//! - [`progress`]: tracking vectors, residues, progress measure, bounds.
//! - [`harness`]: the `faultq` command-line experiments.

pub mod algorithms;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod progress;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
pub use rng::RandomStream;
pub use state::{AmplitudeBlock, DensityMatrix, RegisterDims, StateVector, UnitaryOp, C64, DEFAULT_MAX_DIM};
