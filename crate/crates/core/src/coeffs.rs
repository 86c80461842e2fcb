//! Parabolic problem data, the rescaled coefficients a₀, a₁, the Yosida
//! regularisation of ψ and the divided-difference coefficient g.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::noise::{ito_correction, Domain, WienerField};
use crate::parabolic::Grid1D;

/// Scalar diffusion coefficient a₁₁(t, ξ) in one space dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Constant(f64),
    /// a = base + amp · t · sin ξ.
    Oscillating {
        base: f64,
        amp: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Zero,
    /// ψ(r) = c r.
    Linear(f64),
    /// ψ(r) = r³.
    Cubic,
    /// ψ(r) = arctan r.
    Arctan,
}

/// Declared constants of |ψ(r₁) − ψ(r₂)| ≤ L |r₁ − r₂| |ψ₀(r₁, r₂)| with
/// |ψ₀| ≤ C (|r₁|^q + |r₂|^q + 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Majorant {
    pub lipschitz: f64,
    pub constant: f64,
    pub q: f64,
}

impl Majorant {
    pub fn envelope(&self, r1: f64, r2: f64) -> f64 {
        self.lipschitz * self.constant * (r1.abs().powf(self.q) + r2.abs().powf(self.q) + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicProblem {
    pub name: String,
    pub diffusion: Diffusion,
    pub drift: Drift,
    pub nonlinearity: Nonlinearity,
    pub horizon: f64,
    /// Declared ellipticity constant γ.
    pub gamma: f64,
}

pub const LIBRARY: [&str; 4] = ["heat", "variable-diffusion", "cubic", "arctan"];

impl ParabolicProblem {
    /// Built-in problem by name.
    pub fn library(name: &str, horizon: f64) -> Result<Self> {
        let (diffusion, nonlinearity) = match name {
            "heat" => (Diffusion::Constant(1.0), Nonlinearity::Zero),
            "variable-diffusion" => (
                Diffusion::Oscillating {
                    base: 1.0,
                    amp: 0.5,
                },
                Nonlinearity::Zero,
            ),
            "cubic" => (Diffusion::Constant(1.0), Nonlinearity::Cubic),
            "arctan" => (Diffusion::Constant(1.0), Nonlinearity::Arctan),
            other => {
                return Err(Error::Config(format!(
                    "unknown problem `{other}` (expected one of {})",
                    LIBRARY.join(", ")
                )))
            }
        };
        if !(horizon > 0.0) {
            return Err(Error::Config(format!(
                "problem.T = {horizon} must be positive"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            diffusion,
            drift: Drift::Zero,
            nonlinearity,
            horizon,
            gamma: 1.0,
        })
    }

    pub fn a(&self, t: f64, xi: f64) -> f64 {
        match self.diffusion {
            Diffusion::Constant(c) => c,
            Diffusion::Oscillating { base, amp } => base + amp * t * xi.sin(),
        }
    }

    pub fn a_t(&self, _t: f64, xi: f64) -> f64 {
        match self.diffusion {
            Diffusion::Constant(_) => 0.0,
            Diffusion::Oscillating { amp, .. } => amp * xi.sin(),
        }
    }

    pub fn a_xi(&self, t: f64, xi: f64) -> f64 {
        match self.diffusion {
            Diffusion::Constant(_) => 0.0,
            Diffusion::Oscillating { amp, .. } => amp * t * xi.cos(),
        }
    }

    pub fn b(&self, _t: f64, _xi: f64) -> f64 {
        match self.drift {
            Drift::Zero => 0.0,
            Drift::Constant(c) => c,
        }
    }

    pub fn div_b(&self, _t: f64, _xi: f64) -> f64 {
        0.0
    }

    pub fn psi(&self, _t: f64, _xi: f64, r: f64) -> f64 {
        match self.nonlinearity {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear(c) => c * r,
            Nonlinearity::Cubic => r * r * r,
            Nonlinearity::Arctan => r.atan(),
        }
    }

    pub fn psi_r(&self, _t: f64, _xi: f64, r: f64) -> f64 {
        match self.nonlinearity {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear(c) => c,
            Nonlinearity::Cubic => 3.0 * r * r,
            Nonlinearity::Arctan => 1.0 / (1.0 + r * r),
        }
    }

    /// sup |ψ_r|, or `None` when ψ_r is unbounded.
    pub fn psi_r_bound(&self) -> Option<f64> {
        match self.nonlinearity {
            Nonlinearity::Zero => Some(0.0),
            Nonlinearity::Linear(c) => Some(c.abs()),
            Nonlinearity::Cubic => None,
            Nonlinearity::Arctan => Some(1.0),
        }
    }

    pub fn majorant(&self) -> Majorant {
        match self.nonlinearity {
            Nonlinearity::Zero => Majorant {
                lipschitz: 1.0,
                constant: 0.0,
                q: 0.0,
            },
            Nonlinearity::Linear(c) => Majorant {
                lipschitz: c.abs(),
                constant: 1.0,
                q: 0.0,
            },
            // r₁³ − r₂³ = (r₁ − r₂)(r₁² + r₁r₂ + r₂²) ≤ (r₁ − r₂) · 1.5 (r₁² + r₂²)
            Nonlinearity::Cubic => Majorant {
                lipschitz: 1.0,
                constant: 1.5,
                q: 2.0,
            },
            Nonlinearity::Arctan => Majorant {
                lipschitz: 1.0,
                constant: 1.0,
                q: 0.0,
            },
        }
    }

    pub fn nonlinearity_is_zero(&self) -> bool {
        matches!(self.nonlinearity, Nonlinearity::Zero)
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self.nonlinearity,
            Nonlinearity::Zero | Nonlinearity::Linear(_)
        )
    }
}

/// a₀ and a₁ of the rescaled equation on the interior grid at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledCoefficients {
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
}

/// Coefficients of `dy/dt − ∂(a ∂y) + a₀ y + a₁ ∂y + e^{−W} ψ(e^W y) = 0`
/// obtained by substituting X = e^W y into the Itô equation (d = 1):
///
/// ```text
/// a₀ = μ − a (W'' + W'²) − a' W' + b W'
/// a₁ = −2 a W' + b
/// ```
///
/// `include_ito` drops μ when false, which is only meaningful as a mutation.
pub fn rescaled_coefficients(
    problem: &ParabolicProblem,
    field: &WienerField,
    m: usize,
    include_ito: bool,
) -> Result<RescaledCoefficients> {
    let grid = interval_grid(field)?;
    let mu = if include_ito {
        ito_correction(field.basis(), field.spec())?
    } else {
        vec![0.0; grid.n()]
    };
    Ok(rescaled_with_mu(problem, field, m, &mu, grid))
}

pub(crate) fn rescaled_with_mu(
    problem: &ParabolicProblem,
    field: &WienerField,
    m: usize,
    mu: &[f64],
    grid: &Grid1D,
) -> RescaledCoefficients {
    let t = field.times()[m];
    let s = field.eval_at(m);
    let n = grid.n();
    let mut a0 = Vec::with_capacity(n);
    let mut a1 = Vec::with_capacity(n);
    for i in 0..n {
        let xi = grid.node(i);
        let a = problem.a(t, xi);
        let b = problem.b(t, xi);
        let (w1, w2) = (s.dw[i], s.d2w[i]);
        a0.push(mu[i] - a * (w2 + w1 * w1) - problem.a_xi(t, xi) * w1 + b * w1);
        a1.push(-2.0 * a * w1 + b);
    }
    RescaledCoefficients { a0, a1 }
}

pub(crate) fn interval_grid(field: &WienerField) -> Result<&Grid1D> {
    match field.basis().domain() {
        Domain::Interval(g) => Ok(g),
        Domain::Torus { .. } => Err(Error::Config(
            "parabolic problems need an interval noise basis".into(),
        )),
    }
}

/// Yosida approximation ψ_ε(r) = ψ(y*) where y* + ε ψ(y*) = r.
pub fn yosida(problem: &ParabolicProblem, eps: f64, t: f64, xi: f64, r: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!(
            "Yosida parameter {eps} must be positive"
        )));
    }
    let f = |y: f64| y + eps * problem.psi(t, xi, y) - r;
    let (mut lo, mut hi) = if r >= 0.0 { (0.0, r) } else { (r, 0.0) };
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Hypothesis(format!(
            "resolvent root not bracketed at r = {r}: ψ is not monotone nondecreasing"
        )));
    }
    if flo == 0.0 {
        return Ok(problem.psi(t, xi, lo));
    }
    if fhi == 0.0 {
        return Ok(problem.psi(t, xi, hi));
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fy = f(y);
        if fy == 0.0 {
            break;
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let slope = 1.0 + eps * problem.psi_r(t, xi, y);
        let newton = y - fy / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - y).abs() <= 1e-12 || hi - lo <= 1e-12;
        y = next;
        if done {
            break;
        }
    }
    Ok(problem.psi(t, xi, y))
}

/// Outcome of sampling the structural hypotheses on ψ and a.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// min over samples of the smallest eigenvalue of [a_ij].
    pub ellipticity_margin: f64,
    pub elliptic: bool,
    pub zero_at_origin: bool,
    pub monotone: bool,
    /// Smallest slack of the declared Lipschitz majorant (negative = violated).
    pub majorant_margin: f64,
    pub majorant_holds: bool,
    /// Empirical smallest C in the majorant that covers every sampled pair.
    pub fitted_constant: f64,
    pub samples: usize,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.elliptic && self.zero_at_origin && self.monotone && self.majorant_holds
    }
}

/// Sample (t, ξ, r) on a lattice of about `sample_budget` points and check
/// ellipticity, ψ(·,·,0) = 0, monotonicity and the declared majorant.
pub fn verify_assumptions(problem: &ParabolicProblem, sample_budget: usize) -> AssumptionReport {
    let per_axis = ((sample_budget.max(8) as f64).cbrt().ceil() as usize).max(2);
    let ts: Vec<f64> = (0..per_axis)
        .map(|i| problem.horizon * i as f64 / (per_axis - 1) as f64)
        .collect();
    let xis: Vec<f64> = (0..per_axis)
        .map(|i| PI * i as f64 / (per_axis - 1) as f64)
        .collect();
    let rs: Vec<f64> = (0..per_axis)
        .map(|i| -4.0 + 8.0 * i as f64 / (per_axis - 1) as f64)
        .collect();
    let majorant = problem.majorant();

    let mut ell = f64::INFINITY;
    let mut zero = true;
    let mut monotone = true;
    let mut margin = f64::INFINITY;
    let mut fitted = 0.0_f64;
    let mut samples = 0;
    for &t in &ts {
        for &xi in &xis {
            ell = ell.min(problem.a(t, xi));
            zero &= problem.psi(t, xi, 0.0) == 0.0;
            for w in rs.windows(2) {
                monotone &= problem.psi(t, xi, w[1]) >= problem.psi(t, xi, w[0]);
            }
            for (i, &r1) in rs.iter().enumerate() {
                for &r2 in &rs[..i] {
                    samples += 1;
                    let lhs = (problem.psi(t, xi, r1) - problem.psi(t, xi, r2)).abs();
                    let scale = majorant.lipschitz * (r1 - r2).abs();
                    let rhs = scale
                        * majorant.constant
                        * (r1.abs().powf(majorant.q) + r2.abs().powf(majorant.q) + 1.0);
                    margin = margin.min(rhs - lhs);
                    let unit =
                        scale * (r1.abs().powf(majorant.q) + r2.abs().powf(majorant.q) + 1.0);
                    if unit > 0.0 {
                        fitted = fitted.max(lhs / unit);
                    }
                }
            }
        }
    }
    AssumptionReport {
        ellipticity_margin: ell,
        elliptic: ell > 0.0 && ell >= problem.gamma,
        zero_at_origin: zero,
        monotone,
        majorant_margin: margin,
        majorant_holds: margin >= -1e-12,
        fitted_constant: fitted,
        samples,
    }
}

/// Threshold below which y₁ and y₂ are treated as equal in [`lipschitz_quotient`].
pub const EQUALITY_THRESHOLD: f64 = 1e-14;

/// g = (B₁y₁ − B₁y₂)/(y₁ − y₂) with B₁y = e^{−W} ψ(t, ξ, e^W y); 0 where the
/// two states agree to [`EQUALITY_THRESHOLD`].
pub fn lipschitz_quotient(
    problem: &ParabolicProblem,
    y1: &[f64],
    y2: &[f64],
    field: &WienerField,
    m: usize,
) -> Result<Vec<f64>> {
    let grid = interval_grid(field)?;
    let t = field.times()[m];
    let w = field.eval_at(m).w;
    Ok((0..grid.n())
        .map(|i| {
            let d = y1[i] - y2[i];
            if d.abs() <= EQUALITY_THRESHOLD {
                return 0.0;
            }
            let xi = grid.node(i);
            let e = w[i].exp();
            let b1 = problem.psi(t, xi, e * y1[i]) / e;
            let b2 = problem.psi(t, xi, e * y2[i]) / e;
            (b1 - b2) / d
        })
        .collect())
}

/// Bound on |g| implied by the declared majorant:
/// L C (‖e^W y₁‖^q_∞ + ‖e^W y₂‖^q_∞ + 1).
pub fn quotient_bound(problem: &ParabolicProblem, y1: &[f64], y2: &[f64], w: &[f64]) -> f64 {
    let sup = |y: &[f64]| {
        y.iter()
            .zip(w)
            .fold(0.0_f64, |m, (a, b)| m.max((a * b.exp()).abs()))
    };
    problem.majorant().envelope(sup(y1), sup(y2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_basis, uniform_times, NoiseSpec};
    use std::sync::Arc;

    fn frozen_sine_field(n: usize, c: f64) -> WienerField {
        // W(t, ξ) = c sin ξ at t = 1 via one mode with μ₁ β₁(1) √(2/π) = c.
        let basis = Arc::new(build_basis(Domain::Interval(Grid1D::new(n).unwrap()), 1).unwrap());
        let spec = NoiseSpec::from_coefficients(vec![1.0]);
        let beta = c / (2.0 / PI).sqrt();
        WienerField::from_paths(basis, spec, vec![0.0, 1.0], vec![vec![0.0, beta]]).unwrap()
    }

    #[test]
    fn zero_field_leaves_ito_term_only() {
        let basis = Arc::new(build_basis(Domain::Interval(Grid1D::new(32).unwrap()), 2).unwrap());
        let spec = NoiseSpec::power_law(2, 0.4, 1.0).unwrap();
        let field = WienerField::zero(basis.clone(), spec.clone(), uniform_times(1.0, 2)).unwrap();
        let p = ParabolicProblem::library("variable-diffusion", 1.0).unwrap();
        let c = rescaled_coefficients(&p, &field, 1, true).unwrap();
        let mu = ito_correction(&basis, &spec).unwrap();
        assert_eq!(c.a0, mu);
        assert!(c.a1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frozen_sine_substitution() {
        let n = 64;
        let c = 0.3;
        let field = frozen_sine_field(n, c);
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let k = rescaled_coefficients(&p, &field, 1, true).unwrap();
        let mu = ito_correction(field.basis(), field.spec()).unwrap();
        let g = Grid1D::new(n).unwrap();
        for i in 0..n {
            let x = g.node(i);
            // W'' = −c sin ξ, W' = c cos ξ
            let a0 = mu[i] + c * x.sin() - c * c * x.cos().powi(2);
            let a1 = -2.0 * c * x.cos();
            assert!((k.a0[i] - a0).abs() < 1e-13);
            assert!((k.a1[i] - a1).abs() < 1e-13);
        }
    }

    #[test]
    fn homogeneity_in_w() {
        let n = 32;
        let p = ParabolicProblem::library("heat", 1.0).unwrap();
        let f1 = frozen_sine_field(n, 0.2);
        let f2 = frozen_sine_field(n, 0.4);
        let k1 = rescaled_coefficients(&p, &f1, 1, false).unwrap();
        let k2 = rescaled_coefficients(&p, &f2, 1, false).unwrap();
        let g = Grid1D::new(n).unwrap();
        for i in 0..n {
            assert!((k2.a1[i] - 2.0 * k1.a1[i]).abs() < 1e-14);
            let x = g.node(i);
            let quad = |c: f64| -c * c * x.cos().powi(2);
            let lin1 = k1.a0[i] - quad(0.2);
            let lin2 = k2.a0[i] - quad(0.4);
            assert!((lin2 - 2.0 * lin1).abs() < 1e-14);
            assert!((quad(0.4) - 4.0 * quad(0.2)).abs() < 1e-14);
        }
    }

    #[test]
    fn yosida_examples() {
        let cubic = ParabolicProblem::library("cubic", 1.0).unwrap();
        assert_eq!(yosida(&cubic, 0.5, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert!((yosida(&cubic, 1.0, 0.0, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-11);
        let mut lin = cubic.clone();
        lin.nonlinearity = Nonlinearity::Linear(1.0);
        for &(eps, r) in &[(0.5, 3.0), (2.0, -1.5), (1e-3, 0.7)] {
            assert!((yosida(&lin, eps, 0.0, 1.0, r).unwrap() - r / (1.0 + eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn yosida_detects_non_monotone_psi() {
        let mut p = ParabolicProblem::library("heat", 1.0).unwrap();
        p.nonlinearity = Nonlinearity::Linear(-2.0);
        assert!(matches!(
            yosida(&p, 1.0, 0.0, 1.0, 1.0),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn yosida_monotone_and_resolvent_bounded() {
        let p = ParabolicProblem::library("cubic", 1.0).unwrap();
        let eps = 0.3;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let r = -10.0 + 0.1 * i as f64;
            let v = yosida(&p, eps, 0.0, 1.0, r).unwrap();
            assert!(v >= prev - 1e-12);
            assert!(v.abs() <= r.abs() / eps + 1e-9);
            assert!(v.abs() <= p.psi(0.0, 1.0, r).abs() + 1e-12);
            prev = v;
        }
        // convergence to ψ as ε → 0
        let r = 1.3;
        let errs: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&e| (yosida(&p, e, 0.0, 1.0, r).unwrap() - r.powi(3)).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-4);
    }

    #[test]
    fn assumptions_identity_cubic() {
        let p = ParabolicProblem::library("cubic", 1.0).unwrap();
        let r = verify_assumptions(&p, 1000);
        assert!(r.pass());
        assert_eq!(r.ellipticity_margin, 1.0);
        assert!(r.fitted_constant <= 1.5);
    }

    #[test]
    fn assumptions_negative_diffusion_fails() {
        let mut p = ParabolicProblem::library("heat", 1.0).unwrap();
        p.diffusion = Diffusion::Constant(-1.0);
        let r = verify_assumptions(&p, 200);
        assert!(!r.elliptic);
        assert!(!r.pass());
    }

    #[test]
    fn assumptions_decreasing_psi_fails() {
        let mut p = ParabolicProblem::library("heat", 1.0).unwrap();
        p.nonlinearity = Nonlinearity::Linear(-1.0);
        let r = verify_assumptions(&p, 200);
        assert!(!r.monotone);
        assert!(!r.pass());
    }

    #[test]
    fn library_problems_pass() {
        for name in LIBRARY {
            let p = ParabolicProblem::library(name, 1.0).unwrap();
            assert!(verify_assumptions(&p, 500).pass(), "{name}");
        }
        assert!(ParabolicProblem::library("nope", 1.0).is_err());
    }

    #[test]
    fn quotient_examples() {
        let n = 16;
        let basis = Arc::new(build_basis(Domain::Interval(Grid1D::new(n).unwrap()), 1).unwrap());
        let field = WienerField::zero(
            basis,
            NoiseSpec::from_coefficients(vec![0.1]),
            vec![0.0, 1.0],
        )
        .unwrap();
        let cubic = ParabolicProblem::library("cubic", 1.0).unwrap();
        let y = vec![0.5; n];
        assert!(lipschitz_quotient(&cubic, &y, &y, &field, 1)
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
        let g = lipschitz_quotient(&cubic, &vec![2.0; n], &vec![1.0; n], &field, 1).unwrap();
        assert!(g.iter().all(|&v| (v - 7.0).abs() < 1e-13));
        let mut lin = cubic.clone();
        lin.nonlinearity = Nonlinearity::Linear(1.0);
        let g = lipschitz_quotient(&lin, &vec![0.3; n], &vec![-1.0; n], &field, 1).unwrap();
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }
}
