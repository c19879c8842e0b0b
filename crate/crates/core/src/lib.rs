//! Simulation laboratory for one-dimensional multi-class totally asymmetric
//! zero-range and exclusion processes started from decreasing step data,
//! together with the closed-form hydrodynamic limits they are checked against.

pub mod coupling;
pub mod dynamics;
mod error;
pub mod experiments;
pub mod hydro;
pub mod io;
pub mod lattice;
pub mod measures;

pub use error::{Error, Result};
