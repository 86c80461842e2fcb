//! Finite-difference discretisation of the rescaled random PDE on (0, π)
//! and a direct Euler–Maruyama integrator for the original Itô equation.

pub mod grid;
pub mod operator;
pub mod solver;
pub mod tridiag;

pub use grid::Grid1D;
pub use operator::{
    assemble_a, assemble_b, fit_operator_constants, DiscreteOperator, OperatorConstants,
};
pub use solver::{
    solve_random_pde, solve_spde_direct, transform_from_spde, transform_to_spde, RescaledSystem,
    SchemeParams, Trajectory,
};
pub use tridiag::Tridiagonal;
