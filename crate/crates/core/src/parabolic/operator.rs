use crate::coeffs::{ParabolicProblem, RescaledCoefficients};
use crate::error::{Error, Result};

use super::grid::Grid1D;
use super::tridiag::Tridiagonal;

/// A banded operator on the interior grid, tagged with its time label.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub t: f64,
    pub matrix: Tridiagonal,
}

impl DiscreteOperator {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.matrix.matvec(z)
    }
}

/// −D₋(a D₊) with a evaluated at the cell faces by averaging the two
/// neighbouring nodes (the boundary nodes 0 and π included). Homogeneous
/// Dirichlet values are eliminated, so the matrix acts on interior nodes.
pub fn assemble_a(problem: &ParabolicProblem, t: f64, grid: &Grid1D) -> Result<DiscreteOperator> {
    let n = grid.n();
    let h = grid.spacing();
    let nodal: Vec<f64> = (0..n + 2).map(|i| problem.a(t, i as f64 * h)).collect();
    if let Some(i) = nodal.iter().position(|&a| !(a > 0.0)) {
        return Err(Error::Hypothesis(format!(
            "diffusion coefficient {} is not positive at t = {t}, xi = {}",
            nodal[i],
            i as f64 * h
        )));
    }
    let face: Vec<f64> = nodal.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let inv_h2 = 1.0 / (h * h);
    let mut m = Tridiagonal::zeros(n);
    for i in 0..n {
        m.diag[i] = (face[i] + face[i + 1]) * inv_h2;
        if i + 1 < n {
            m.upper[i] = -face[i + 1] * inv_h2;
            m.lower[i] = -face[i + 1] * inv_h2;
        }
    }
    Ok(DiscreteOperator { t, matrix: m })
}

/// a₀ z + a₁ ∂z with the derivative centered.
pub fn assemble_b(coeffs: &RescaledCoefficients, grid: &Grid1D, t: f64) -> DiscreteOperator {
    let n = grid.n();
    let half = 0.5 / grid.spacing();
    let mut m = Tridiagonal::zeros(n);
    for i in 0..n {
        m.diag[i] = coeffs.a0[i];
        if i > 0 {
            m.lower[i - 1] = -coeffs.a1[i] * half;
        }
        if i + 1 < n {
            m.upper[i] = coeffs.a1[i] * half;
        }
    }
    DiscreteOperator { t, matrix: m }
}

/// The constant-coefficient Dirichlet Laplacian −D₋D₊.
pub fn laplacian(grid: &Grid1D) -> Tridiagonal {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut m = Tridiagonal::zeros(n);
    m.diag.fill(2.0 * inv_h2);
    m.lower.fill(-inv_h2);
    m.upper.fill(-inv_h2);
    m
}

/// ‖f‖²₋₁ = ⟨L⁻¹ f, f⟩ with L the discrete Dirichlet Laplacian.
pub fn dual_norm_sq(grid: &Grid1D, f: &[f64]) -> Result<f64> {
    let v = laplacian(grid).solve(f)?;
    Ok(grid.inner(&v, f))
}

/// Constants fitted on a probe set: ⟨Az,z⟩ ≥ α₂‖z‖₁² and ‖Az‖₋₁ ≤ α₁‖z‖₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConstants {
    pub alpha1: f64,
    pub alpha2: f64,
}

pub fn fit_operator_constants(
    op: &DiscreteOperator,
    grid: &Grid1D,
    probes: &[Vec<f64>],
) -> Result<OperatorConstants> {
    let mut alpha1 = 0.0_f64;
    let mut alpha2 = f64::INFINITY;
    for z in probes {
        let energy = grid.h1_seminorm_sq(z);
        if energy == 0.0 {
            continue;
        }
        let az = op.apply(z);
        alpha2 = alpha2.min(grid.inner(&az, z) / energy);
        alpha1 = alpha1.max((dual_norm_sq(grid, &az)? / energy).sqrt());
    }
    if !alpha2.is_finite() {
        return Err(Error::Degenerate("probe set has no nonzero field".into()));
    }
    Ok(OperatorConstants { alpha1, alpha2 })
}
