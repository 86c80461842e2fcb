use std::fmt::Write as _;

use crate::coeffs::{interval_grid, rescaled_with_mu, ParabolicProblem, RescaledCoefficients};
use crate::error::{Error, Result};
use crate::noise::{ito_correction, WienerField};

use super::grid::Grid1D;
use super::operator::{assemble_a, assemble_b};
use super::tridiag::Tridiagonal;

/// Below this L² norm a state counts as zero for quotient purposes.
pub const ZERO_STATE: f64 = 1e-14;

/// Blow-up threshold for the direct Itô integrator.
pub const BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Keep the Itô correction μ in a₀. Turning it off is a mutation used to
    /// show the two solution routes then disagree.
    pub ito_correction: bool,
    /// Reject steps with Δt · max|a₁| > h.
    pub enforce_stability: bool,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            ito_correction: true,
            enforce_stability: true,
        }
    }
}

/// Time-indexed grid fields with cached L² norm and energy ⟨A(t)z, z⟩^{1/2}.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid1D,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    l2: Vec<f64>,
    h1: Vec<f64>,
}

impl Trajectory {
    pub fn new(
        problem: &ParabolicProblem,
        grid: Grid1D,
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Config("one state per time node required".into()));
        }
        let mut l2 = Vec::with_capacity(times.len());
        let mut h1 = Vec::with_capacity(times.len());
        for (t, z) in times.iter().zip(&states) {
            l2.push(grid.l2(z));
            h1.push(energy(problem, &grid, *t, z)?);
        }
        Ok(Self {
            grid,
            times,
            states,
            l2,
            h1,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, m: usize) -> &[f64] {
        &self.states[m]
    }

    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least one node")
    }

    pub fn l2_norm(&self, m: usize) -> f64 {
        self.l2[m]
    }

    pub fn h1_energy(&self, m: usize) -> f64 {
        self.h1[m]
    }

    /// ⟨A z, z⟩ / |z|², or `None` once the state has vanished.
    pub fn quotient(&self, m: usize) -> Option<f64> {
        (self.l2[m] > ZERO_STATE).then(|| (self.h1[m] / self.l2[m]).powi(2))
    }

    /// Pointwise difference of two trajectories on the same grids.
    pub fn difference(&self, other: &Trajectory, problem: &ParabolicProblem) -> Result<Trajectory> {
        if self.times != other.times || self.grid != other.grid {
            return Err(Error::Config("trajectories live on different grids".into()));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Trajectory::new(problem, self.grid.clone(), self.times.clone(), states)
    }

    /// Columns `t,l2_norm,h1_energy,quotient`; quotient is empty once the
    /// state has vanished.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,l2_norm,h1_energy,quotient\n");
        for m in 0..self.len() {
            let q = self
                .quotient(m)
                .map(|q| format!("{q:.16e}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{q}",
                self.times[m], self.l2[m], self.h1[m]
            );
        }
        out
    }
}

fn energy(problem: &ParabolicProblem, grid: &Grid1D, t: f64, z: &[f64]) -> Result<f64> {
    let a = assemble_a(problem, t, grid)?;
    Ok(grid.inner(&a.apply(z), z).max(0.0).sqrt())
}

/// The pieces of one IMEX step for the rescaled equation along a fixed path.
pub struct RescaledSystem<'a> {
    pub problem: &'a ParabolicProblem,
    pub field: &'a WienerField,
    pub grid: Grid1D,
    mu: Vec<f64>,
    params: SchemeParams,
}

impl<'a> RescaledSystem<'a> {
    pub fn new(
        problem: &'a ParabolicProblem,
        field: &'a WienerField,
        params: SchemeParams,
    ) -> Result<Self> {
        let grid = interval_grid(field)?.clone();
        let mu = if params.ito_correction {
            ito_correction(field.basis(), field.spec())?
        } else {
            vec![0.0; grid.n()]
        };
        Ok(Self {
            problem,
            field,
            grid,
            mu,
            params,
        })
    }

    pub fn dt(&self, m: usize) -> f64 {
        let t = self.field.times();
        t[m + 1] - t[m]
    }

    /// I + Δt A(t_{m+1}).
    pub fn implicit(&self, m: usize) -> Result<Tridiagonal> {
        let a = assemble_a(self.problem, self.field.times()[m + 1], &self.grid)?;
        Ok(Tridiagonal::identity(self.grid.n()).combine(1.0, &a.matrix, self.dt(m)))
    }

    /// a₀ and a₁ at node m.
    pub fn coefficients(&self, m: usize) -> RescaledCoefficients {
        rescaled_with_mu(self.problem, self.field, m, &self.mu, &self.grid)
    }

    /// B(t_m); fails if the step violates the advection stability bound.
    pub fn explicit_b(&self, m: usize) -> Result<Tridiagonal> {
        let coeffs = self.coefficients(m);
        if self.params.enforce_stability {
            let amax = coeffs.a1.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
            if self.dt(m) * amax > self.grid.spacing() {
                return Err(Error::Numerical {
                    step: m,
                    reason: format!(
                        "dt * max|a1| = {} exceeds h = {}",
                        self.dt(m) * amax,
                        self.grid.spacing()
                    ),
                });
            }
        }
        Ok(assemble_b(&coeffs, &self.grid, self.field.times()[m]).matrix)
    }

    /// B₁(t_m) y = e^{−W} ψ(t_m, ξ, e^W y).
    pub fn nonlinear(&self, m: usize, w: &[f64], y: &[f64]) -> Vec<f64> {
        let t = self.field.times()[m];
        (0..y.len())
            .map(|i| {
                let e = w[i].exp();
                self.problem.psi(t, self.grid.node(i), e * y[i]) / e
            })
            .collect()
    }
}

/// IMEX Euler for dy/dt + A y + B y + B₁ y = 0, y(0) = x:
/// (I + Δt A(t_{m+1})) y_{m+1} = y_m − Δt (B(t_m) + B₁(t_m)) y_m.
pub fn solve_random_pde(
    problem: &ParabolicProblem,
    field: &WienerField,
    x: &[f64],
    params: SchemeParams,
) -> Result<Trajectory> {
    let sys = RescaledSystem::new(problem, field, params)?;
    check_len(&sys.grid, x)?;
    let steps = field.steps();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x.to_vec());
    let mut y = x.to_vec();
    for m in 0..steps {
        let dt = sys.dt(m);
        let by = sys.explicit_b(m)?.matvec(&y);
        let nl = if problem.nonlinearity_is_zero() {
            None
        } else {
            Some(sys.nonlinear(m, &field.eval_at(m).w, &y))
        };
        let mut rhs: Vec<f64> = y.iter().zip(&by).map(|(v, b)| v - dt * b).collect();
        if let Some(nl) = nl {
            for (r, g) in rhs.iter_mut().zip(nl) {
                *r -= dt * g;
            }
        }
        y = sys.implicit(m)?.solve(&rhs).map_err(|e| at_step(e, m))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: m,
                reason: "non-finite state".into(),
            });
        }
        states.push(y.clone());
    }
    Trajectory::new(problem, sys.grid, field.times().to_vec(), states)
}

/// Euler–Maruyama for the Itô equation with implicit diffusion:
/// (I + Δt A(t_{m+1})) X_{m+1} = X_m − Δt (b ∂X_m + ψ(t_m, X_m)) + X_m ΔW_m.
pub fn solve_spde_direct(
    problem: &ParabolicProblem,
    field: &WienerField,
    x: &[f64],
    params: SchemeParams,
) -> Result<Trajectory> {
    let sys = RescaledSystem::new(problem, field, params)?;
    let grid = &sys.grid;
    check_len(grid, x)?;
    let steps = field.steps();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x.to_vec());
    let mut v = x.to_vec();
    for m in 0..steps {
        let dt = sys.dt(m);
        let t = field.times()[m];
        let dw = field.increment(m);
        let dv = grid.centered_derivative(&v);
        let rhs: Vec<f64> = (0..grid.n())
            .map(|i| {
                let xi = grid.node(i);
                v[i] - dt * (problem.b(t, xi) * dv[i] + problem.psi(t, xi, v[i])) + v[i] * dw[i]
            })
            .collect();
        v = sys.implicit(m)?.solve(&rhs).map_err(|e| at_step(e, m))?;
        let norm = grid.l2(&v);
        if !(norm <= BLOW_UP) {
            return Err(Error::Numerical {
                step: m,
                reason: format!("|X|_2 = {norm:e} exceeds blow-up threshold"),
            });
        }
        states.push(v.clone());
    }
    Trajectory::new(problem, sys.grid, field.times().to_vec(), states)
}

fn check_len(grid: &Grid1D, x: &[f64]) -> Result<()> {
    if x.len() != grid.n() {
        return Err(Error::Config(format!(
            "initial field has {} values, grid has {}",
            x.len(),
            grid.n()
        )));
    }
    Ok(())
}

fn at_step(e: Error, m: usize) -> Error {
    match e {
        Error::Numerical { reason, .. } => Error::Numerical { step: m, reason },
        other => other,
    }
}

fn rescale(
    traj: &Trajectory,
    field: &WienerField,
    problem: &ParabolicProblem,
    sign: f64,
) -> Result<Trajectory> {
    if traj.times() != field.times() {
        return Err(Error::Config(
            "trajectory and noise use different time grids".into(),
        ));
    }
    let states = (0..traj.len())
        .map(|m| {
            let w = field.eval_at(m).w;
            traj.state(m)
                .iter()
                .zip(&w)
                .map(|(y, w)| (sign * w).exp() * y)
                .collect()
        })
        .collect();
    Trajectory::new(problem, traj.grid().clone(), traj.times().to_vec(), states)
}

/// X = e^W y at every node.
pub fn transform_to_spde(
    y: &Trajectory,
    field: &WienerField,
    problem: &ParabolicProblem,
) -> Result<Trajectory> {
    rescale(y, field, problem, 1.0)
}

/// y = e^{−W} X at every node.
pub fn transform_from_spde(
    x: &Trajectory,
    field: &WienerField,
    problem: &ParabolicProblem,
) -> Result<Trajectory> {
    rescale(x, field, problem, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_basis, sample_brownian, uniform_times, Domain, NoiseSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn quiet(n: usize, steps: usize, horizon: f64) -> WienerField {
        let basis = Arc::new(build_basis(Domain::Interval(Grid1D::new(n).unwrap()), 1).unwrap());
        WienerField::zero(
            basis,
            NoiseSpec::from_coefficients(vec![0.0]),
            uniform_times(horizon, steps),
        )
        .unwrap()
    }

    fn noisy(n: usize, steps: usize, sigma: f64, seed: u64) -> WienerField {
        let basis = Arc::new(build_basis(Domain::Interval(Grid1D::new(n).unwrap()), 4).unwrap());
        let spec = NoiseSpec::power_law(4, sigma, 1.0).unwrap();
        sample_brownian(basis, spec, uniform_times(1.0, steps), seed).unwrap()
    }

    #[test]
    fn heat_sine_decays_like_exp() {
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f = quiet(128, 1000, 1.0);
        let g = Grid1D::new(128).unwrap();
        let tr = solve_random_pde(&p, &f, &g.sample(f64::sin), SchemeParams::default()).unwrap();
        let exact = g.sample(|x| (-1.0_f64).exp() * x.sin());
        let err = tr
            .last()
            .iter()
            .zip(&exact)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn second_mode_ratio() {
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f = quiet(128, 1000, 1.0);
        let g = Grid1D::new(128).unwrap();
        let tr = solve_random_pde(
            &p,
            &f,
            &g.sample(|x| (2.0 * x).sin()),
            SchemeParams::default(),
        )
        .unwrap();
        let ratio = tr.l2_norm(1000) / tr.l2_norm(0);
        assert!((ratio / (-4.0_f64).exp() - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid1D::new(32).unwrap();
        for name in ["heat", "cubic", "arctan"] {
            let p = ParabolicProblem::library(name, 1.0).unwrap();
            let f = noisy(32, 100, 0.2, 3);
            let zero = vec![0.0; g.n()];
            let y = solve_random_pde(&p, &f, &zero, SchemeParams::default()).unwrap();
            let x = solve_spde_direct(&p, &f, &zero, SchemeParams::default()).unwrap();
            assert!(y.last().iter().chain(x.last()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn routes_coincide_without_noise() {
        let p = ParabolicProblem::library("cubic", 1.0).unwrap();
        let f = quiet(64, 200, 1.0);
        let g = Grid1D::new(64).unwrap();
        let x0 = g.sample(|x| 2.0 * x.sin() + (3.0 * x).sin());
        let y = solve_random_pde(&p, &f, &x0, SchemeParams::default()).unwrap();
        let x = solve_spde_direct(&p, &f, &x0, SchemeParams::default()).unwrap();
        for m in 0..y.len() {
            for (a, b) in y.state(m).iter().zip(x.state(m)) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn transform_round_trip() {
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f = noisy(32, 50, 0.3, 11);
        let g = Grid1D::new(32).unwrap();
        let y = solve_random_pde(&p, &f, &g.sample(f64::sin), SchemeParams::default()).unwrap();
        let x = transform_to_spde(&y, &f, &p).unwrap();
        let back = transform_from_spde(&x, &f, &p).unwrap();
        for m in 0..y.len() {
            for (a, b) in y.state(m).iter().zip(back.state(m)) {
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300) + 1e-300);
            }
        }
        let q = quiet(32, 50, 1.0);
        assert_eq!(transform_to_spde(&y, &q, &p).unwrap().state(7), y.state(7));
    }

    #[test]
    fn cached_norms_match_recomputation() {
        let p = ParabolicProblem::library("variable-diffusion", 1.0).unwrap();
        let f = noisy(48, 100, 0.2, 5);
        let g = Grid1D::new(48).unwrap();
        let tr =
            solve_random_pde(&p, &f, &g.sample(|x| x * (PI - x)), SchemeParams::default()).unwrap();
        for m in (0..tr.len()).step_by(17) {
            let z = tr.state(m);
            let a = assemble_a(&p, tr.times()[m], &g).unwrap();
            let e = g.inner(&a.apply(z), z).sqrt();
            assert!((tr.h1_energy(m) - e).abs() <= 1e-12 * e);
            assert!((tr.l2_norm(m) - g.l2(z)).abs() <= 1e-12 * g.l2(z));
        }
    }

    #[test]
    fn linear_in_initial_data_without_psi() {
        let p = ParabolicProblem::library("variable-diffusion", 1.0).unwrap();
        let f = noisy(32, 100, 0.2, 9);
        let g = Grid1D::new(32).unwrap();
        let u = g.sample(|x| x.sin() + 0.3 * (5.0 * x).sin());
        let v = g.sample(|x| x * (PI - x));
        let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let su = solve_random_pde(&p, &f, &u, SchemeParams::default()).unwrap();
        let sv = solve_random_pde(&p, &f, &v, SchemeParams::default()).unwrap();
        let suv = solve_random_pde(&p, &f, &uv, SchemeParams::default()).unwrap();
        for ((a, b), c) in su.last().iter().zip(sv.last()).zip(suv.last()) {
            assert!((2.0 * a - 3.0 * b - c).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_energy_identity_per_step() {
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f = quiet(64, 400, 1.0);
        let g = Grid1D::new(64).unwrap();
        let tr = solve_random_pde(
            &p,
            &f,
            &g.sample(|x| x.sin() + (4.0 * x).sin()),
            SchemeParams::default(),
        )
        .unwrap();
        let dt = 1.0 / 400.0;
        for m in 0..tr.len() - 1 {
            let lhs = (tr.l2_norm(m + 1).powi(2) - tr.l2_norm(m).powi(2)) / dt;
            let rhs = -2.0 * tr.h1_energy(m + 1).powi(2);
            let scale = tr.h1_energy(m).powi(2);
            assert!(
                (lhs - rhs).abs() <= 40.0 * dt * scale,
                "{m}: {lhs} vs {rhs}"
            );
            assert!(tr.l2_norm(m + 1) <= tr.l2_norm(m));
        }
    }

    #[test]
    fn stability_bound_enforced() {
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f = noisy(128, 4, 50.0, 1);
        let g = Grid1D::new(128).unwrap();
        let r = solve_random_pde(&p, &f, &g.sample(f64::sin), SchemeParams::default());
        assert!(matches!(r, Err(Error::Numerical { .. })));
    }

    #[test]
    fn csv_header_and_rows() {
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f = quiet(16, 4, 1.0);
        let g = Grid1D::new(16).unwrap();
        let tr = solve_random_pde(&p, &f, &g.sample(f64::sin), SchemeParams::default()).unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,l2_norm,h1_energy,quotient\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
