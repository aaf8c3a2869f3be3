//! Convergent μ-power series for quasi-periodic response solutions of
//! `ε ẍ + ẋ + ε g(x) = ε f(ωt)`.

pub mod config;
pub mod error;
pub mod fourier;
pub mod frequency;
pub mod model;
pub mod report;
pub mod solver;
pub mod trees;
pub mod verify;

pub use error::{Error, Result};
pub use fourier::{FourierSeries, Mode};
pub use frequency::FrequencyVector;
pub use model::Problem;
pub use solver::{ResponseSolver, SeriesSolution, SolverRegistry};
