//! Spectral laboratory for a classical extended charge coupled to the Maxwell
//! field: soliton solutions, coupled evolution on a spherical Fourier grid,
//! scattered radiation and its infrared content.

pub mod coherent;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod matter;
pub mod observables;
pub mod pipeline;
pub mod pulse;
pub mod quadrature;
pub mod scattering;
pub mod scenario;
pub mod spatial;
pub mod vector;

pub use error::{Error, Result};
