//! Numerical laboratory for a three-component derivative nonlinear
//! Schrodinger system on periodic boxes in one to three dimensions.

pub mod error;
pub mod evolution;
pub mod cli;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod io;

pub use error::{Error, Result};
pub use functionals::{FunctionalReport, PhysParams, WaveParams};
pub use grid::{Grid, ScalarField, Spectrum, State, VectorField};
