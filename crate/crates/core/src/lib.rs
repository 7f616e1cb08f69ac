//! Numerical laboratory for periodic homogenisation of stochastic heat
//! equations driven by noise that oscillates on the scale of the medium.

pub mod cell;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod fourier;
pub mod limit;
pub mod linalg;
pub mod noise;
pub mod rng;
pub mod solver;

pub use cell::{CellSolution, Coefficients};
pub use error::{Error, Result};
pub use fourier::{CellRatio, SpectralField};
pub use limit::{LimitModel, LimitRule};
pub use noise::{Mollifier, NoiseFamily, NoiseSpec};
pub use solver::{PathOutput, Scheme, SolverConfig};
