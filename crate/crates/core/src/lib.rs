//! Stochastic replicator dynamics with quadratic potentials, simulated through
//! the square-root lift of the simplex onto the unit sphere.

pub mod cli;
pub mod error;
pub mod graph;
pub mod metastability;
pub mod potential;
pub mod qprocess;
pub mod rng;
pub mod sde;
pub mod stationary;
pub mod tolerance;
pub mod tridiag;

pub use error::{Error, Result};
