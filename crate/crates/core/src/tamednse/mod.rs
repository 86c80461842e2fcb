//! Spectral Galerkin scheme for the stochastic tamed Navier–Stokes system on
//! the periodic torus, the functionals used in its backward-uniqueness
//! estimate and a Monte Carlo check of that estimate.

pub mod galerkin;
pub mod montecarlo;
pub mod spectral;

pub use galerkin::{nonlinear_term, taming_g, GalerkinSolver, NoiseForcing, NseParams};
pub use montecarlo::{
    check_expectation_bound, default_c_grid, gamma_of_t, interpolation_probe, perturbed_pair,
    random_field, run_coupled_paths, simulate_pair, taylor_green, CoupledPath, ExpectationReport,
    ExpectationSettings, InterpolationFit, NseDiagnostics, NseRun, TestPoint,
};
pub use spectral::{leray_project, FourierVelocity, Lattice, SpectralTransform};

/// φ_ε(u) = ‖u‖² / (|u|² + ε).
pub fn phi_eps(u: &FourierVelocity, eps: f64) -> f64 {
    u.energy_sq() / (u.l2_sq() + eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn phi_of_zero_and_single_mode() {
        assert_eq!(phi_eps(&FourierVelocity::zeros(2), 1e-8), 0.0);
        let a = 0.3;
        let mut u = FourierVelocity::zeros(3);
        u.set_real_mode(
            [0, 2, 1],
            [
                Complex64::new(a, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        for eps in [1e-2, 1e-6, 1e-12] {
            let expected = 5.0 * 2.0 * a * a / (2.0 * a * a + eps);
            assert!((phi_eps(&u, eps) - expected).abs() < 1e-14 * expected);
        }
        assert!((phi_eps(&u, 1e-14) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn phi_is_scale_invariant_in_the_limit() {
        let u = random_field(4, 1);
        let base = phi_eps(&u, 0.0);
        for s in [1e-3, 0.5, 7.0, 1e4] {
            assert!((phi_eps(&u.scaled(s), 1e-30) - base).abs() < 1e-12 * base);
        }
    }
}
