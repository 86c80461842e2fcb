//! Numerical laboratory for backward uniqueness of stochastic parabolic
//! equations with multiplicative noise and of the stochastic tamed
//! Navier–Stokes system.

pub mod cli;
pub mod coeffs;
pub mod controllability;
pub mod diagnostics;
pub mod error;
pub mod noise;
pub mod parabolic;
pub mod stats;
pub mod tamednse;

pub use error::{Error, Result};
