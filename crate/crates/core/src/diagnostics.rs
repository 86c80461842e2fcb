//! Dirichlet-quotient tracking, the random path constants of the
//! log-convexity argument, and checks of the quotient growth bound and the
//! backward estimate along computed trajectories.

use crate::coeffs::{interval_grid, ParabolicProblem};
use crate::error::{Error, Result};
use crate::noise::WienerField;
use crate::parabolic::solver::ZERO_STATE;
use crate::parabolic::{DiscreteOperator, Grid1D, Trajectory};

/// Discrete Rayleigh quotient ⟨A z, z⟩ / |z|².
pub fn dirichlet_quotient(z: &[f64], a: &DiscreteOperator, grid: &Grid1D) -> Result<f64> {
    let nz = grid.l2(z);
    if nz <= ZERO_STATE {
        return Err(Error::Degenerate(format!("|z|_2 = {nz:e} at t = {}", a.t)));
    }
    Ok(grid.inner(&a.apply(z), z) / (nz * nz))
}

/// Per-node Λ(t) and log|z(t)|², cut off after the state first vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientTrace {
    pub times: Vec<f64>,
    pub lambda: Vec<Option<f64>>,
    pub norm_sq: Vec<f64>,
    pub log_norm_sq: Vec<Option<f64>>,
    /// First node with |z|₂ ≤ 1e−14.
    pub vanished_at: Option<usize>,
}

impl QuotientTrace {
    pub fn from_trajectory(z: &Trajectory) -> Self {
        let vanished_at = (0..z.len()).find(|&m| z.l2_norm(m) <= ZERO_STATE);
        let live = |m: usize| vanished_at.map_or(true, |v| m < v);
        let times = z.times().to_vec();
        let norm_sq = (0..z.len())
            .map(|m| z.l2_norm(m).powi(2))
            .collect::<Vec<_>>();
        let lambda = (0..z.len())
            .map(|m| if live(m) { z.quotient(m) } else { None })
            .collect();
        let log_norm_sq = norm_sq
            .iter()
            .enumerate()
            .map(|(m, s)| if live(m) { Some(s.ln()) } else { None })
            .collect();
        Self {
            times,
            lambda,
            norm_sq,
            log_norm_sq,
            vanished_at,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Node index of `t` on a time grid, allowing for rounding in `t` itself.
pub fn node_at(times: &[f64], t: f64) -> Result<usize> {
    let scale = times.last().copied().unwrap_or(1.0).abs().max(1.0);
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * scale)
        .ok_or(Error::NotGridNode(t))
}

/// Calibration constants C₁…C₄. The theory only asserts they exist and are
/// independent of the sample path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConstants {
    pub nu1: f64,
    pub gamma2: f64,
    pub gamma1_star: f64,
    pub gamma_star: f64,
    pub calib: Calibration,
}

/// γ*₁ = C₁ + C₂(ν₁ + γ₂)².
pub fn gamma1_star(nu1: f64, gamma2: f64, calib: &Calibration) -> f64 {
    calib.c1 + calib.c2 * (nu1 + gamma2).powi(2)
}

/// γ* = C₄(ν₁ + γ₂ + 1) exp(γ*₁ (T − t₀)) / γ*₁.
pub fn gamma_star(nu1: f64, gamma2: f64, calib: &Calibration, horizon_minus_t0: f64) -> f64 {
    let g1 = gamma1_star(nu1, gamma2, calib);
    calib.c4 * (nu1 + gamma2 + 1.0) / g1 * (g1 * horizon_minus_t0).exp()
}

/// ν₁ = sup_t ‖W(t)‖_{C²_b} + sup_{t,ξ} |∇W|² (the constant in front set to
/// one) and γ₂ = sup_t ‖e^{−W}X₁‖^q_∞ + sup_t ‖e^{−W}X₂‖^q_∞ + 1.
pub fn path_constants(
    field: &WienerField,
    x1: &Trajectory,
    x2: &Trajectory,
    problem: &ParabolicProblem,
    calib: Calibration,
    t0: f64,
) -> Result<PathConstants> {
    interval_grid(field)?;
    if x1.times() != field.times() || x2.times() != field.times() {
        return Err(Error::Config(
            "trajectories and noise use different time grids".into(),
        ));
    }
    let q = problem.majorant().q;
    let mut c2 = 0.0_f64;
    let mut grad_sq = 0.0_f64;
    let mut sup1 = 0.0_f64;
    let mut sup2 = 0.0_f64;
    for m in 0..field.times().len() {
        let s = field.eval_at(m);
        let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        c2 = c2.max(sup(&s.w)).max(sup(&s.dw)).max(sup(&s.d2w));
        grad_sq = grad_sq.max(sup(&s.dw).powi(2));
        let scaled = |x: &[f64]| {
            x.iter()
                .zip(&s.w)
                .fold(0.0_f64, |a, (v, w)| a.max((v * (-w).exp()).abs()))
        };
        sup1 = sup1.max(scaled(x1.state(m)));
        sup2 = sup2.max(scaled(x2.state(m)));
    }
    let nu1 = c2 + grad_sq;
    let gamma2 = sup1.powf(q) + sup2.powf(q) + 1.0;
    let horizon = *field.times().last().unwrap();
    Ok(PathConstants {
        nu1,
        gamma2,
        gamma1_star: gamma1_star(nu1, gamma2, &calib),
        gamma_star: gamma_star(nu1, gamma2, &calib, horizon - t0),
        calib,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientBoundReport {
    /// max_t log(Λ(t)/Λ(t₀)) − γ*₁ (t − t₀).
    pub max_excess: f64,
    /// Smallest γ₁ ≥ 0 with Λ(t) ≤ e^{γ₁(t−t₀)} Λ(t₀) on the trace.
    pub fitted_gamma1: f64,
    pub pass: bool,
    pub degenerate: bool,
}

/// Checks Λ(t) ≤ e^{γ*₁(t − t₀)} Λ(t₀) for t ≥ t₀ on the live part of the
/// trace.
pub fn check_quotient_bound(
    trace: &QuotientTrace,
    constants: &PathConstants,
    t0: f64,
) -> Result<QuotientBoundReport> {
    let i0 = node_at(&trace.times, t0)?;
    let degenerate = QuotientBoundReport {
        max_excess: f64::NAN,
        fitted_gamma1: f64::NAN,
        pass: true,
        degenerate: true,
    };
    let lam0 = match trace.lambda[i0] {
        Some(l) if l > 0.0 => l,
        _ => return Ok(degenerate),
    };
    let mut excess = f64::NEG_INFINITY;
    let mut fitted = 0.0_f64;
    for m in i0 + 1..trace.len() {
        let Some(lam) = trace.lambda[m] else { break };
        let dt = trace.times[m] - trace.times[i0];
        let growth = (lam / lam0).ln();
        excess = excess.max(growth - constants.gamma1_star * dt);
        fitted = fitted.max(growth / dt);
    }
    Ok(QuotientBoundReport {
        max_excess: excess,
        fitted_gamma1: fitted,
        pass: excess <= 0.0,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardReport {
    /// max_t log|z(t)| − log(exp(γ* Λ̂(t₀)) |z(T)|).
    pub worst_margin: f64,
    /// Smallest γ ≥ 0 for which the estimate holds at every t ∈ [t₀, T].
    pub fitted_gamma: f64,
    /// ‖z(t₀)‖₁² / |z(t₀)|².
    pub lambda_t0: f64,
    pub z_t0: f64,
    pub z_terminal: f64,
    pub pass: bool,
    /// |z(T)| ≥ exp(−γ̂ Λ̂(t₀)) |z(t₀)| and |z(T)| above the machine floor.
    pub contrapositive: bool,
    pub degenerate: bool,
}

/// Smallest representable-difference floor used for "finite-time vanishing".
pub const MACHINE_FLOOR: f64 = 1e-300;

/// Checks |z(t)| ≤ exp(γ* ‖z(t₀)‖₁²/|z(t₀)|²) |z(T)| for z = X₁ − X₂ and
/// every node t ∈ [t₀, T].
pub fn check_backward_estimate(
    x1: &Trajectory,
    x2: &Trajectory,
    problem: &ParabolicProblem,
    constants: &PathConstants,
    t0: f64,
) -> Result<BackwardReport> {
    let z = x1.difference(x2, problem)?;
    let i0 = node_at(z.times(), t0)?;
    let last = z.len() - 1;
    let z0 = z.l2_norm(i0);
    let zt = z.l2_norm(last);
    if z0 <= ZERO_STATE {
        let all_zero = (0..z.len()).all(|m| z.l2_norm(m) <= ZERO_STATE);
        return Ok(BackwardReport {
            worst_margin: f64::NAN,
            fitted_gamma: 0.0,
            lambda_t0: f64::NAN,
            z_t0: z0,
            z_terminal: zt,
            pass: all_zero,
            contrapositive: true,
            degenerate: true,
        });
    }
    let lam = z.quotient(i0).expect("state is live at t0");
    let log_rhs_base = zt.ln();
    let mut worst = f64::NEG_INFINITY;
    let mut fitted = 0.0_f64;
    for m in i0..=last {
        let log_gap = z.l2_norm(m).ln() - log_rhs_base;
        worst = worst.max(log_gap - constants.gamma_star * lam);
        fitted = fitted.max(log_gap / lam);
    }
    let floor_ok = zt >= MACHINE_FLOOR;
    let contrapositive = floor_ok && zt.ln() >= -fitted * lam + z0.ln() - 1e-12;
    Ok(BackwardReport {
        worst_margin: worst,
        fitted_gamma: fitted,
        lambda_t0: lam,
        z_t0: z0,
        z_terminal: zt,
        pass: worst <= 0.0,
        contrapositive,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    /// log|z(t_{m+1})|² − 2 log|z(t_m)|² + log|z(t_{m−1})|² on the live part.
    pub second_differences: Vec<f64>,
    pub min: Option<f64>,
}

pub fn log_convexity_probe(trace: &QuotientTrace) -> ConvexityReport {
    let live: Vec<f64> = trace.log_norm_sq.iter().map_while(|v| *v).collect();
    let second_differences: Vec<f64> = live.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let min = second_differences.iter().copied().reduce(f64::min);
    ConvexityReport {
        second_differences,
        min,
    }
}
