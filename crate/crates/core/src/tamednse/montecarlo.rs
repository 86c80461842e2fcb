use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{
    build_basis, sample_brownian, torus_modes, uniform_times, Domain, NoiseSpec, NormalStream,
    WienerField,
};
use crate::stats::{linear_fit, mean, standard_error};

use super::galerkin::{GalerkinSolver, NoiseForcing, NseParams};
use super::spectral::{leray_project, FourierVelocity};

/// Numerical setup shared by every path of a tamed Navier–Stokes run.
#[derive(Debug, Clone, PartialEq)]
pub struct NseRun {
    pub k_max: usize,
    pub params: NseParams,
    pub sigma: f64,
    pub noise_modes: usize,
    pub dt: f64,
    pub horizon: f64,
    pub eps: f64,
    /// Diagnostics (W^{1,4}, taming activity, γ quadrature) every this many steps.
    pub diag_stride: usize,
}

impl Default for NseRun {
    fn default() -> Self {
        Self {
            k_max: 8,
            params: NseParams::default(),
            sigma: 0.1,
            noise_modes: 8,
            dt: 5e-4,
            horizon: 0.5,
            eps: 1e-8,
            diag_stride: 10,
        }
    }
}

impl NseRun {
    pub fn steps(&self) -> Result<usize> {
        let steps = (self.horizon / self.dt).round();
        if !(self.dt > 0.0)
            || !(self.horizon > 0.0)
            || (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon
        {
            return Err(Error::Config(format!(
                "nse.T = {} must be a positive multiple of nse.dt = {}",
                self.horizon, self.dt
            )));
        }
        if self.diag_stride == 0 {
            return Err(Error::Config("diagnostic stride must be positive".into()));
        }
        Ok(steps as usize)
    }

    /// μ_j = σ j^{−2} on the lowest trigonometric modes.
    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        NoiseSpec::power_law(self.noise_modes, self.sigma, 2.0)
    }

    pub fn forcing(&self) -> Result<NoiseForcing> {
        Ok(NoiseForcing {
            modes: torus_modes(self.noise_modes),
            amplitudes: self.noise_spec()?.coefficients().to_vec(),
        })
    }

    pub fn solver(&self) -> Result<GalerkinSolver> {
        GalerkinSolver::new(self.k_max, self.params, self.forcing()?)
    }
}

/// u = A (sin x cos y cos z, −cos x sin y cos z, 0).
pub fn taylor_green(k_max: usize, amplitude: f64) -> FourierVelocity {
    let u = FourierVelocity::from_physical(k_max, |[x, y, z]| {
        [
            amplitude * x.sin() * y.cos() * z.cos(),
            -amplitude * x.cos() * y.sin() * z.cos(),
            0.0,
        ]
    });
    leray_project(&u)
}

/// Taylor–Green data and the same field plus δ ŷ cos 3x. The difference has
/// ‖Z‖/|Z| = 3.
pub fn perturbed_pair(
    k_max: usize,
    amplitude: f64,
    delta: f64,
) -> (FourierVelocity, FourierVelocity) {
    let x1 = taylor_green(k_max, amplitude);
    let mut bump = FourierVelocity::zeros(k_max);
    let zero = Complex64::new(0.0, 0.0);
    bump.set_real_mode([3, 0, 0], [zero, Complex64::new(0.5 * delta, 0.0), zero]);
    let mut x2 = x1.clone();
    x2.axpy(1.0, &bump);
    (x1, x2)
}

/// Per-node diagnostics of one Galerkin trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NseDiagnostics {
    pub times: Vec<f64>,
    pub l2_sq: Vec<f64>,
    pub energy_sq: Vec<f64>,
    pub w14: Vec<f64>,
    /// max_x |X(x)|², the quantity compared against the taming threshold.
    pub max_speed_sq: Vec<f64>,
}

impl NseDiagnostics {
    fn record(&mut self, solver: &mut GalerkinSolver, t: f64, u: &FourierVelocity) {
        self.times.push(t);
        self.l2_sq.push(u.l2_sq());
        self.energy_sq.push(u.energy_sq());
        let (w14, max_sq) = solver.w14_and_max_speed_sq(u);
        self.w14.push(w14);
        self.max_speed_sq.push(max_sq);
    }
}

/// γ(t) = ∫₀ᵗ (‖X₁‖²_{W^{1,4}} + ‖X₂‖²_{W^{1,4}} + ‖X₁‖⁴ + ‖X₂‖⁴ + 1) ds by
/// the trapezoid rule over the diagnostic nodes.
pub fn gamma_of_t(x1: &NseDiagnostics, x2: &NseDiagnostics) -> Result<Vec<f64>> {
    if x1.times != x2.times {
        return Err(Error::Config(
            "trajectories are not on the same time grid".into(),
        ));
    }
    let f: Vec<f64> = (0..x1.times.len())
        .map(|i| {
            x1.w14[i].powi(2)
                + x2.w14[i].powi(2)
                + x1.energy_sq[i].powi(2)
                + x2.energy_sq[i].powi(2)
                + 1.0
        })
        .collect();
    let mut gamma = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for i in 0..f.len() {
        if i > 0 {
            acc += 0.5 * (x1.times[i] - x1.times[i - 1]) * (f[i] + f[i - 1]);
        }
        gamma.push(acc);
    }
    Ok(gamma)
}

/// Two solutions driven by one Brownian realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub seed: u64,
    pub x1: NseDiagnostics,
    pub x2: NseDiagnostics,
    pub z_l2_sq: Vec<f64>,
    pub z_energy_sq: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Largest divergence defect seen at a diagnostic node.
    pub max_divergence: f64,
}

impl CoupledPath {
    pub fn times(&self) -> &[f64] {
        &self.x1.times
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,x1_l2_sq,x2_l2_sq,x1_energy_sq,x2_energy_sq,x1_w14,x2_w14,x1_max_speed_sq,x2_max_speed_sq,z_l2_sq,z_energy_sq,gamma\n",
        );
        for i in 0..self.times().len() {
            let row = [
                self.x1.times[i],
                self.x1.l2_sq[i],
                self.x2.l2_sq[i],
                self.x1.energy_sq[i],
                self.x2.energy_sq[i],
                self.x1.w14[i],
                self.x2.w14[i],
                self.x1.max_speed_sq[i],
                self.x2.max_speed_sq[i],
                self.z_l2_sq[i],
                self.z_energy_sq[i],
                self.gamma[i],
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Integrate X₁ and X₂ from the given data with the Brownian increments drawn
/// from `seed`.
pub fn simulate_pair(
    run: &NseRun,
    x1: &FourierVelocity,
    x2: &FourierVelocity,
    seed: u64,
) -> Result<CoupledPath> {
    let mut solver = run.solver()?;
    simulate_pair_with(&mut solver, run, x1, x2, seed)
}

fn simulate_pair_with(
    solver: &mut GalerkinSolver,
    run: &NseRun,
    x1: &FourierVelocity,
    x2: &FourierVelocity,
    seed: u64,
) -> Result<CoupledPath> {
    let steps = run.steps()?;
    let spec = run.noise_spec()?;
    let basis = Arc::new(build_basis(Domain::Torus { m: 4 }, run.noise_modes)?);
    let field = sample_brownian(basis, spec, uniform_times(run.horizon, steps), seed)?;
    let mut u1 = x1.clone();
    let mut u2 = x2.clone();
    let mut d1 = NseDiagnostics::default();
    let mut d2 = NseDiagnostics::default();
    let mut z_l2 = Vec::new();
    let mut z_energy = Vec::new();
    let mut max_div = 0.0_f64;
    let mut dbeta = vec![0.0; run.noise_modes];
    for m in 0..=steps {
        if m % run.diag_stride == 0 || m == steps {
            let t = field.times()[m];
            d1.record(solver, t, &u1);
            d2.record(solver, t, &u2);
            let z = u1.sub(&u2);
            z_l2.push(z.l2_sq());
            z_energy.push(z.energy_sq());
            max_div = max_div
                .max(u1.divergence_defect())
                .max(u2.divergence_defect());
        }
        if m == steps {
            break;
        }
        for (j, db) in dbeta.iter_mut().enumerate() {
            let p = field.path(j);
            *db = p[m + 1] - p[m];
        }
        u1 = solver.step(&u1, run.dt, &dbeta, m)?;
        u2 = solver.step(&u2, run.dt, &dbeta, m)?;
    }
    let gamma = gamma_of_t(&d1, &d2)?;
    Ok(CoupledPath {
        seed,
        x1: d1,
        x2: d2,
        z_l2_sq: z_l2,
        z_energy_sq: z_energy,
        gamma,
        max_divergence: max_div,
    })
}

/// Terminal state of one trajectory driven by the coefficient paths of
/// `field`, one step per interval of its time grid.
pub fn integrate_on_field(
    run: &NseRun,
    u0: &FourierVelocity,
    field: &WienerField,
) -> Result<FourierVelocity> {
    let mut solver = run.solver()?;
    let times = field.times();
    let mut u = u0.clone();
    let mut dbeta = vec![0.0; run.noise_modes];
    for m in 0..times.len() - 1 {
        for (j, db) in dbeta.iter_mut().enumerate() {
            let p = field.path(j);
            *db = p[m + 1] - p[m];
        }
        u = solver.step(&u, times[m + 1] - times[m], &dbeta, m)?;
    }
    Ok(u)
}

/// Run one coupled pair per seed in parallel. Results keep seed order.
pub fn run_coupled_paths(
    run: &NseRun,
    x1: &FourierVelocity,
    x2: &FourierVelocity,
    seeds: &[u64],
) -> Result<Vec<Result<CoupledPath>>> {
    run.steps()?;
    run.solver()?;
    Ok(seeds
        .par_iter()
        .map_init(
            || run.solver().expect("validated above"),
            |solver, &seed| simulate_pair_with(solver, run, x1, x2, seed),
        )
        .collect())
}

/// 0 followed by 20 points per decade from 1e−4 to 1e3.
pub fn default_c_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((0..=140).map(|i| 10f64.powf(-4.0 + i as f64 / 20.0)));
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationSettings {
    pub eps: f64,
    pub test_times: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub eps_sequence: Vec<f64>,
    /// ‖Z(0)‖/|Z(0)|.
    pub z0_ratio: f64,
    /// φ_ε(Z(0)).
    pub phi0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestPoint {
    pub t: f64,
    /// Smallest grid C for which the inequality holds at this t alone.
    pub min_c: Option<f64>,
    /// mean(lhs − rhs) and its standard error at the common fitted C.
    pub excess: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationReport {
    pub paths_used: usize,
    pub excluded: usize,
    pub exclusions_ok: bool,
    pub degenerate: bool,
    pub points: Vec<TestPoint>,
    pub fitted_c: Option<f64>,
    pub batch_c: [Option<f64>; 2],
    pub batch_stable: bool,
    pub fitted_c_phi: Option<f64>,
    /// (ε, worst standardised excess at the fitted C).
    pub eps_study: Vec<(f64, f64)>,
    pub min_terminal_l2_sq: f64,
    pub pass: bool,
}

fn node(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
        .ok_or(Error::NotGridNode(t))
}

/// Per-path d = e^{−Cγ(t)} log(|Z(t)|²+ε) − e^{−Cγ(T)} log(|Z(T)|²+ε).
fn differences(paths: &[&CoupledPath], i: usize, c: f64, eps: f64) -> Vec<f64> {
    paths
        .iter()
        .map(|p| {
            let last = p.gamma.len() - 1;
            let at = |j: usize| (-c * p.gamma[j]).exp() * (p.z_l2_sq[j] + eps).ln();
            at(i) - at(last)
        })
        .collect()
}

/// Standardised excess (mean(d) − C − ratio − 2 SE); ≤ 0 means the
/// inequality holds within two standard errors.
fn excess(d: &[f64], c: f64, ratio: f64) -> (f64, f64) {
    let e = mean(d) - c - ratio;
    let se = standard_error(d);
    (e, se)
}

fn holds(
    paths: &[&CoupledPath],
    nodes: &[usize],
    c: f64,
    s: &ExpectationSettings,
    eps: f64,
) -> bool {
    nodes.iter().all(|&i| {
        let (e, se) = excess(&differences(paths, i, c, eps), c, s.z0_ratio);
        e <= 2.0 * se
    })
}

fn fit_c(paths: &[&CoupledPath], nodes: &[usize], s: &ExpectationSettings) -> Option<f64> {
    s.c_grid
        .iter()
        .copied()
        .find(|&c| holds(paths, nodes, c, s, s.eps))
}

fn fit_c_phi(paths: &[&CoupledPath], s: &ExpectationSettings) -> Option<f64> {
    let n = paths.first().map_or(0, |p| p.gamma.len());
    s.c_grid.iter().copied().find(|&c| {
        (0..n).all(|i| {
            let v: Vec<f64> = paths
                .iter()
                .map(|p| (-c * p.gamma[i]).exp() * p.z_energy_sq[i] / (p.z_l2_sq[i] + s.eps))
                .collect();
            mean(&v) - s.phi0 <= 2.0 * standard_error(&v)
        })
    })
}

fn stable(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) if a == 0.0 && b == 0.0 => true,
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => a.max(b) / a.min(b) <= 2.0,
        _ => false,
    }
}

/// Statistical check of E[e^{−Cγ(t)} log|Z(t)|²] ≤ E[e^{−Cγ(T)} log|Z(T)|²]
/// + C + ‖Z(0)‖/|Z(0)| and of E[φ_ε(Z(t)) e^{−C_φ γ(t)}] ≤ φ_ε(Z(0)).
/// Failed paths are excluded; more than 5% exclusions fails the check.
pub fn check_expectation_bound(
    results: &[Result<CoupledPath>],
    s: &ExpectationSettings,
) -> Result<ExpectationReport> {
    let paths: Vec<&CoupledPath> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let excluded = results.len() - paths.len();
    let exclusions_ok = (excluded as f64) <= 0.05 * results.len() as f64;
    let first = paths.first().ok_or_else(|| Error::Numerical {
        step: 0,
        reason: "every path failed".into(),
    })?;
    let nodes: Vec<usize> = s
        .test_times
        .iter()
        .map(|&t| node(first.times(), t))
        .collect::<Result<_>>()?;
    let min_terminal_l2_sq = paths
        .iter()
        .map(|p| *p.z_l2_sq.last().unwrap())
        .fold(f64::INFINITY, f64::min);
    let degenerate = paths.iter().all(|p| p.z_l2_sq.iter().all(|&z| z == 0.0));
    if degenerate {
        return Ok(ExpectationReport {
            paths_used: paths.len(),
            excluded,
            exclusions_ok,
            degenerate,
            points: Vec::new(),
            fitted_c: None,
            batch_c: [None, None],
            batch_stable: true,
            fitted_c_phi: None,
            eps_study: Vec::new(),
            min_terminal_l2_sq,
            pass: exclusions_ok,
        });
    }
    let fitted_c = fit_c(&paths, &nodes, s);
    let c_report = fitted_c.unwrap_or(*s.c_grid.last().unwrap_or(&0.0));
    let points = s
        .test_times
        .iter()
        .zip(&nodes)
        .map(|(&t, &i)| {
            let (e, se) = excess(
                &differences(&paths, i, c_report, s.eps),
                c_report,
                s.z0_ratio,
            );
            TestPoint {
                t,
                min_c: fit_c(&paths, &[i], s),
                excess: e,
                standard_error: se,
            }
        })
        .collect();
    let (batch_c, batch_stable) = if paths.len() >= 4 {
        let half = paths.len() / 2;
        let a = fit_c(&paths[..half], &nodes, s);
        let b = fit_c(&paths[half..], &nodes, s);
        ([a, b], stable(a, b))
    } else {
        ([fitted_c, fitted_c], fitted_c.is_some())
    };
    let fitted_c_phi = fit_c_phi(&paths, s);
    let eps_study = s
        .eps_sequence
        .iter()
        .map(|&eps| {
            let worst = nodes
                .iter()
                .map(|&i| {
                    let (e, se) =
                        excess(&differences(&paths, i, c_report, eps), c_report, s.z0_ratio);
                    e - 2.0 * se
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (eps, worst)
        })
        .collect();
    let pass = exclusions_ok && fitted_c.is_some() && batch_stable && fitted_c_phi.is_some();
    Ok(ExpectationReport {
        paths_used: paths.len(),
        excluded,
        exclusions_ok,
        degenerate,
        points,
        fitted_c,
        batch_c,
        batch_stable,
        fitted_c_phi,
        eps_study,
        min_terminal_l2_sq,
        pass,
    })
}

/// Random divergence-free field with spectrum Gaussian × (1+|k|²)^{−s/2},
/// s drawn uniformly from [2, 4].
pub fn random_field(k_max: usize, seed: u64) -> FourierVelocity {
    let mut rng = NormalStream::new(seed, 0);
    let s = 2.0 + 2.0 * rng.uniform();
    let mut u = FourierVelocity::zeros(k_max);
    let lat = u.lattice();
    for idx in 0..lat.len() {
        let mirror = lat.mirror(idx);
        if mirror <= idx {
            continue;
        }
        let k = lat.wave(idx);
        let w = (1.0 + super::spectral::norm_sq(k)).powf(-0.5 * s);
        let v: [Complex64; 3] = std::array::from_fn(|_| Complex64::new(rng.next(), rng.next()) * w);
        u.set_real_mode(k, v);
    }
    leray_project(&u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationFit {
    pub alpha: f64,
    /// α refitted on the fine ensemble alone.
    pub alpha_fine: f64,
    pub constant: f64,
    pub r_squared: f64,
    /// Worst ratio ‖u‖_{W^{1,4}} / (C ‖u‖_{H²}^{1−α} ‖u‖_{L²}^α) on the fine
    /// ensemble; ≤ 1 means covered.
    pub worst_fine_ratio: f64,
    pub covered_fine: usize,
    pub fields: usize,
    pub alpha_in_range: bool,
    pub pass: bool,
}

/// Fit ‖u‖_{W^{1,4}} ≤ C ‖u‖_{H²}^{1−α} ‖u‖_{L²}^α on `fields` random fields
/// at `k_coarse` (α by least squares of log(W/H) on log(L/H), C as the
/// envelope) and test the same constants on fresh fields at `k_fine`.
pub fn interpolation_probe(
    k_coarse: usize,
    k_fine: usize,
    fields: usize,
    seed: u64,
) -> InterpolationFit {
    let sample = |k: usize| -> Vec<(f64, f64, f64)> {
        let mut solver = GalerkinSolver::new(
            k,
            NseParams::default(),
            NoiseForcing {
                modes: vec![],
                amplitudes: vec![],
            },
        )
        .expect("default parameters are valid");
        (0..fields)
            .map(|i| {
                let u = random_field(k, crate::stats::derive_seed(seed, k as u64, i as u64));
                (solver.w14_norm(&u), u.h2_sq().sqrt(), u.l2_sq().sqrt())
            })
            .collect()
    };
    let coarse = sample(k_coarse);
    let xs: Vec<f64> = coarse.iter().map(|(_, h, l)| (l / h).ln()).collect();
    let ys: Vec<f64> = coarse.iter().map(|(w, h, _)| (w / h).ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let alpha = fit.slope;
    let ratio = |(w, h, l): &(f64, f64, f64)| w / (h.powf(1.0 - alpha) * l.powf(alpha));
    let constant = coarse.iter().map(ratio).fold(0.0, f64::max);
    let fine = sample(k_fine);
    let ratios: Vec<f64> = fine.iter().map(|f| ratio(f) / constant).collect();
    let fx: Vec<f64> = fine.iter().map(|(_, h, l)| (l / h).ln()).collect();
    let fy: Vec<f64> = fine.iter().map(|(w, h, _)| (w / h).ln()).collect();
    let alpha_fine = linear_fit(&fx, &fy).slope;
    let covered_fine = ratios.iter().filter(|&&r| r <= 1.0).count();
    let worst_fine_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let alpha_in_range = alpha > 0.5 && alpha < 1.0;
    InterpolationFit {
        alpha,
        alpha_fine,
        constant,
        r_squared: fit.r_squared,
        worst_fine_ratio,
        covered_fine,
        fields,
        alpha_in_range,
        pass: alpha_in_range && covered_fine == fields,
    }
}
