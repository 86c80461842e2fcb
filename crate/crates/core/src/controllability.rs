//! Derivative of the terminal map at zero initial data, its exact discrete
//! adjoint, an injectivity report and approximate reachability of targets
//! by choice of the initial datum.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::coeffs::ParabolicProblem;
use crate::error::{Error, Result};
use crate::noise::WienerField;
use crate::parabolic::{
    assemble_a, solve_random_pde, Grid1D, RescaledSystem, SchemeParams, Tridiagonal,
};

/// Largest grid for which the flow matrix is assembled.
pub const MAX_ASSEMBLY: usize = 256;

/// Per-step factors of the linearised IMEX scheme
/// (I + Δt A(t_{m+1})) v_{m+1} = (I − Δt (B(t_m) + D_m)) v_m, where D_m is
/// multiplication by ψ_r(t_m, ξ, e^W ỹ_m) along the reference solution ỹ.
pub struct LinearizedFlow {
    grid: Grid1D,
    times: Vec<f64>,
    implicit: Vec<Tridiagonal>,
    explicit: Vec<Tridiagonal>,
    /// e^{W(T)}, mapping the rescaled state to the original one at T.
    terminal_weight: Vec<f64>,
    reference: Vec<Vec<f64>>,
    params: SchemeParams,
}

impl LinearizedFlow {
    pub fn new(
        problem: &ParabolicProblem,
        field: &WienerField,
        params: SchemeParams,
    ) -> Result<Self> {
        if problem.psi_r_bound().is_none() {
            return Err(Error::Hypothesis(format!(
                "problem `{}` has unbounded psi_r; the linearised flow needs a bounded potential",
                problem.name
            )));
        }
        let sys = RescaledSystem::new(problem, field, params)?;
        let n = sys.grid.n();
        let reference = solve_random_pde(problem, field, &vec![0.0; n], params)?;
        let steps = field.steps();
        let mut implicit = Vec::with_capacity(steps);
        let mut explicit = Vec::with_capacity(steps);
        for m in 0..steps {
            let dt = sys.dt(m);
            let t = field.times()[m];
            let w = field.eval_at(m).w;
            let mut e = sys.explicit_b(m)?;
            for i in 0..n {
                let r = w[i].exp() * reference.state(m)[i];
                e.diag[i] += problem.psi_r(t, sys.grid.node(i), r);
            }
            explicit.push(Tridiagonal::identity(n).combine(1.0, &e, -dt));
            implicit.push(sys.implicit(m)?);
        }
        let terminal_weight = field.eval_at(steps).w.iter().map(|w| w.exp()).collect();
        let reference = (0..=steps).map(|m| reference.state(m).to_vec()).collect();
        Ok(Self {
            grid: sys.grid,
            times: field.times().to_vec(),
            implicit,
            explicit,
            terminal_weight,
            reference,
            params,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.n()
    }

    /// v(T) for v(0) = u.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut v = u.to_vec();
        for (m, (imp, exp)) in self.implicit.iter().zip(&self.explicit).enumerate() {
            v = imp.solve(&exp.matvec(&v)).map_err(|e| step_error(e, m))?;
        }
        Ok(v)
    }

    /// z(0) for z(T) = p: the transposed steps applied in reverse order.
    pub fn apply_adjoint(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut z = p.to_vec();
        for m in (0..self.implicit.len()).rev() {
            let s = self.implicit[m]
                .transpose()
                .solve(&z)
                .map_err(|e| step_error(e, m))?;
            z = self.explicit[m].transpose().matvec(&s);
        }
        Ok(z)
    }

    /// Backward equation dz/dt = A z + B* z + D z discretised on its own,
    /// with B* z = a₀ z − ∂(a₁ z), A implicit at t_m and the rest explicit at
    /// t_{m+1}. Agrees with [`apply_adjoint`] up to O(Δt + h²).
    ///
    /// [`apply_adjoint`]: LinearizedFlow::apply_adjoint
    pub fn apply_adjoint_continuous(
        &self,
        problem: &ParabolicProblem,
        field: &WienerField,
        p: &[f64],
    ) -> Result<Vec<f64>> {
        let sys = RescaledSystem::new(problem, field, self.params)?;
        let g = &self.grid;
        let mut z = p.to_vec();
        for m in (0..self.implicit.len()).rev() {
            let k = m + 1;
            let dt = self.times[k] - self.times[m];
            let c = sys.coefficients(k);
            let w = field.eval_at(k).w;
            let a1z: Vec<f64> = c.a1.iter().zip(&z).map(|(a, v)| a * v).collect();
            let transport = g.centered_derivative(&a1z);
            let rhs: Vec<f64> = (0..g.n())
                .map(|i| {
                    let pot =
                        problem.psi_r(self.times[k], g.node(i), w[i].exp() * self.reference[k][i]);
                    z[i] - dt * (c.a0[i] * z[i] - transport[i] + pot * z[i])
                })
                .collect();
            let a = assemble_a(problem, self.times[m], g)?;
            z = Tridiagonal::identity(g.n())
                .combine(1.0, &a.matrix, dt)
                .solve(&rhs)
                .map_err(|e| step_error(e, m))?;
        }
        Ok(z)
    }

    /// Columns Γ e_i, assembled in parallel.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n > MAX_ASSEMBLY {
            return Err(Error::Config(format!(
                "flow matrix assembly is capped at n = {MAX_ASSEMBLY}, got {n}"
            )));
        }
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                self.apply(&e)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(n, n, |r, c| cols[c][r]))
    }

    /// Lower bound on log σ_min(Γ) from the step factors:
    /// Σ log(1 − Δt‖B + D‖) − log(1 + Δt‖A‖), both norms bounded above.
    /// `None` when some explicit factor is not provably invertible.
    pub fn log_sigma_min_bound(&self) -> Option<f64> {
        let mut acc = 0.0;
        for (m, (imp, exp)) in self.implicit.iter().zip(&self.explicit).enumerate() {
            let dt = self.times[m + 1] - self.times[m];
            let pert = exp
                .combine(-1.0, &Tridiagonal::identity(self.dim()), 1.0)
                .norm2_bound();
            if pert >= 1.0 {
                return None;
            }
            acc += (1.0 - pert).ln();
            let a_norm = imp
                .combine(1.0, &Tridiagonal::identity(self.dim()), -1.0)
                .norm2_bound()
                / dt;
            acc -= (1.0 + dt * a_norm).ln();
        }
        Some(acc)
    }

    /// Γ followed by multiplication with e^{W(T)}: the derivative of the
    /// terminal map in the original variables.
    pub fn terminal_weight(&self) -> &[f64] {
        &self.terminal_weight
    }
}

fn step_error(e: Error, m: usize) -> Error {
    match e {
        Error::Numerical { reason, .. } => Error::Numerical { step: m, reason },
        other => other,
    }
}

pub fn linearized_flow(
    problem: &ParabolicProblem,
    field: &WienerField,
    u: &[f64],
    params: SchemeParams,
) -> Result<Vec<f64>> {
    LinearizedFlow::new(problem, field, params)?.apply(u)
}

pub fn adjoint_flow(
    problem: &ParabolicProblem,
    field: &WienerField,
    p: &[f64],
    params: SchemeParams,
) -> Result<Vec<f64>> {
    LinearizedFlow::new(problem, field, params)?.apply_adjoint(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// σ_min counts as resolved above n ε σ_max.
    pub resolution: f64,
    /// Log lower bound from the step factors, when available.
    pub log_lower_bound: Option<f64>,
    pub pass: bool,
}

/// Smallest singular value of an assembled matrix; injective at working
/// precision iff it exceeds n ε σ_max.
pub fn injectivity_check(matrix: &DMatrix<f64>) -> InjectivityReport {
    let sv = matrix.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let resolution = matrix.nrows().max(1) as f64 * f64::EPSILON * sigma_max;
    InjectivityReport {
        sigma_min,
        sigma_max,
        resolution,
        log_lower_bound: None,
        pass: sigma_min > resolution,
    }
}

/// SVD of the assembled flow together with its step-factor certificate;
/// passes if either shows σ_min > 0.
pub fn flow_injectivity(flow: &LinearizedFlow) -> Result<InjectivityReport> {
    let mut r = injectivity_check(&flow.matrix()?);
    r.log_lower_bound = flow.log_sigma_min_bound();
    r.pass |= r.log_lower_bound.is_some_and(|b| b.is_finite());
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub controller: Vec<f64>,
    /// ‖S(T)x − target‖₂ from the full nonlinear run.
    pub achieved_distance: f64,
    pub controller_norm: f64,
    pub reg: f64,
}

/// Tikhonov-regularised linearised reachability: minimise
/// ‖Γ_X x − (target − S(T)0)‖² + reg‖x‖² by normal equations, then run the
/// full flow from x.
pub fn approx_reach(
    problem: &ParabolicProblem,
    field: &WienerField,
    target: &[f64],
    reg: f64,
    params: SchemeParams,
) -> Result<ReachResult> {
    if !(reg >= 0.0) {
        return Err(Error::Config(format!("control.reg = {reg} must be >= 0")));
    }
    let flow = LinearizedFlow::new(problem, field, params)?;
    let n = flow.dim();
    if target.len() != n {
        return Err(Error::Config(format!(
            "target has {} values, grid has {n}",
            target.len()
        )));
    }
    let terminal = |x: &[f64]| -> Result<Vec<f64>> {
        let y = solve_random_pde(problem, field, x, params)?;
        Ok(y.last()
            .iter()
            .zip(flow.terminal_weight())
            .map(|(v, w)| v * w)
            .collect())
    };
    let free = terminal(&vec![0.0; n])?;
    let mut gamma = flow.matrix()?;
    for (r, w) in flow.terminal_weight().iter().enumerate() {
        gamma.row_mut(r).scale_mut(*w);
    }
    let residual = DVector::from_iterator(n, target.iter().zip(&free).map(|(t, f)| t - f));
    let mut normal = gamma.transpose() * &gamma;
    let scale = normal.norm();
    let suggested = n as f64 * f64::EPSILON * scale;
    if reg < suggested {
        return Err(Error::Conditioning { reg, suggested });
    }
    for i in 0..n {
        normal[(i, i)] += reg;
    }
    let rhs = gamma.transpose() * residual;
    let chol = normal.cholesky().ok_or(Error::Conditioning {
        reg,
        suggested: suggested.max(reg * 10.0),
    })?;
    let x: Vec<f64> = chol.solve(&rhs).iter().copied().collect();
    let reached = terminal(&x)?;
    let g = flow.grid();
    let miss: Vec<f64> = reached.iter().zip(target).map(|(a, b)| a - b).collect();
    Ok(ReachResult {
        achieved_distance: g.l2(&miss),
        controller_norm: g.l2(&x),
        controller: x,
        reg,
    })
}
