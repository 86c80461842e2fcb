//! Basis-expanded Wiener field W(t, ξ) = Σ_j μ_j e_j(ξ) β_j(t).
//!
//! Two domains are supported: the interval (0, π) with the Dirichlet sine
//! basis, and the periodic torus [0, 2π)³ with real trigonometric modes
//! orthonormal for the normalised (mean) inner product. Derivatives of W are
//! always taken from the analytic basis derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::parabolic::Grid1D;

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Interior nodes of (0, π).
    Interval(Grid1D),
    /// Periodic grid with `m` points per axis on [0, 2π)³.
    Torus { m: usize },
}

/// Wave vector and phase of a real trigonometric torus mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusMode {
    pub wave: [i32; 3],
    /// `true` for √2 sin(κ·x), `false` for √2 cos(κ·x) (or 1 when κ = 0).
    pub sine: bool,
}

impl TorusMode {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let k = self.wave;
        if k == [0, 0, 0] {
            return 1.0;
        }
        let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
        if self.sine {
            2f64.sqrt() * phase.sin()
        } else {
            2f64.sqrt() * phase.cos()
        }
    }

    fn wave_norm_sq(&self) -> f64 {
        self.wave.iter().map(|&k| (k * k) as f64).sum()
    }
}

/// The lowest `count` real trigonometric modes, ordered by |κ|², then by
/// descending lexicographic κ, cosine before sine.
pub fn torus_modes(count: usize) -> Vec<TorusMode> {
    let mut waves = Vec::new();
    let r = 4;
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let k = [a, b, c];
                let first = k.iter().copied().find(|&x| x != 0);
                if first.map_or(true, |f| f > 0) {
                    waves.push(k);
                }
            }
        }
    }
    waves.sort_by(|x, y| {
        let nx: i32 = x.iter().map(|k| k * k).sum();
        let ny: i32 = y.iter().map(|k| k * k).sum();
        nx.cmp(&ny).then(y.cmp(x))
    });
    let mut modes = Vec::with_capacity(count);
    for k in waves {
        if modes.len() >= count {
            break;
        }
        modes.push(TorusMode {
            wave: k,
            sine: false,
        });
        if k != [0, 0, 0] && modes.len() < count {
            modes.push(TorusMode {
                wave: k,
                sine: true,
            });
        }
    }
    modes
}

/// Orthonormal basis sampled on a spatial grid.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    domain: Domain,
    modes: usize,
    values: Vec<Vec<f64>>,
    /// Interval only: first and second ξ-derivatives.
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    torus_modes: Vec<TorusMode>,
}

pub fn build_basis(domain: Domain, modes: usize) -> Result<OrthonormalBasis> {
    if modes == 0 {
        return Err(Error::Config("noise.J must be at least 1".into()));
    }
    match &domain {
        Domain::Interval(grid) => {
            if grid.n() < 4 * modes {
                return Err(Error::Config(format!(
                    "grid of {} nodes cannot resolve {modes} noise modes (need >= {})",
                    grid.n(),
                    4 * modes
                )));
            }
            let norm = (2.0 / PI).sqrt();
            let mut values = Vec::with_capacity(modes);
            let mut first = Vec::with_capacity(modes);
            let mut second = Vec::with_capacity(modes);
            for j in 1..=modes {
                let k = j as f64;
                values.push(grid.sample(|x| norm * (k * x).sin()));
                first.push(grid.sample(|x| norm * k * (k * x).cos()));
                second.push(grid.sample(|x| -norm * k * k * (k * x).sin()));
            }
            Ok(OrthonormalBasis {
                domain,
                modes,
                values,
                first,
                second,
                torus_modes: Vec::new(),
            })
        }
        Domain::Torus { m } => {
            let tm = torus_modes(modes);
            let kmax = tm
                .iter()
                .flat_map(|t| t.wave)
                .map(|k| k.unsigned_abs() as usize)
                .max()
                .unwrap_or(0);
            if *m < 4 * kmax.max(1) {
                return Err(Error::Config(format!(
                    "torus grid of {m} points per axis cannot resolve wave number {kmax}"
                )));
            }
            let step = 2.0 * PI / *m as f64;
            let values = tm
                .iter()
                .map(|mode| {
                    let mut v = Vec::with_capacity(m * m * m);
                    for i in 0..*m {
                        for j in 0..*m {
                            for l in 0..*m {
                                v.push(mode.eval([
                                    i as f64 * step,
                                    j as f64 * step,
                                    l as f64 * step,
                                ]));
                            }
                        }
                    }
                    v
                })
                .collect();
            Ok(OrthonormalBasis {
                domain,
                modes,
                values,
                first: Vec::new(),
                second: Vec::new(),
                torus_modes: tm,
            })
        }
    }
}

impl OrthonormalBasis {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid_len(&self) -> usize {
        self.values[0].len()
    }

    /// e_j on the grid, j = 0-based mode index.
    pub fn values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn first_derivative(&self, j: usize) -> &[f64] {
        &self.first[j]
    }

    pub fn second_derivative(&self, j: usize) -> &[f64] {
        &self.second[j]
    }

    pub fn torus_mode(&self, j: usize) -> Option<TorusMode> {
        self.torus_modes.get(j).copied()
    }

    fn weight(&self) -> f64 {
        match &self.domain {
            Domain::Interval(g) => g.spacing(),
            Domain::Torus { m } => 1.0 / (m * m * m) as f64,
        }
    }

    /// max_{i,j} |⟨e_i, e_j⟩_quad − δ_ij|.
    pub fn orthonormality_defect(&self) -> f64 {
        let w = self.weight();
        let mut worst = 0.0_f64;
        for i in 0..self.modes {
            for j in 0..=i {
                let ip: f64 = w * self.values[i]
                    .iter()
                    .zip(&self.values[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// Discrete ‖e_j‖_{C²_b}: max over grid nodes of |e_j|, |∇e_j|, |D²e_j|.
    /// On the torus the analytic suprema are used.
    pub fn c2_norm(&self, j: usize) -> f64 {
        match &self.domain {
            Domain::Interval(g) => g
                .sup(&self.values[j])
                .max(g.sup(&self.first[j]))
                .max(g.sup(&self.second[j])),
            Domain::Torus { .. } => {
                let mode = self.torus_modes[j];
                let k2 = mode.wave_norm_sq();
                if k2 == 0.0 {
                    1.0
                } else {
                    2f64.sqrt() * 1f64.max(k2.sqrt()).max(k2)
                }
            }
        }
    }

    /// |e_j|²∞ + |∇e_j|²∞.
    pub fn c1_norm_sq(&self, j: usize) -> f64 {
        match &self.domain {
            Domain::Interval(g) => g.sup(&self.values[j]).powi(2) + g.sup(&self.first[j]).powi(2),
            Domain::Torus { .. } => {
                let k2 = self.torus_modes[j].wave_norm_sq();
                if k2 == 0.0 {
                    1.0
                } else {
                    2.0 + 2.0 * k2
                }
            }
        }
    }
}

/// Noise amplitudes μ_j.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    coefficients: Vec<f64>,
    sigma: f64,
    decay_p: f64,
}

impl NoiseSpec {
    /// μ_j = σ j^(−p).
    pub fn power_law(modes: usize, sigma: f64, decay_p: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise.sigma = {sigma} must be finite and >= 0"
            )));
        }
        let coefficients = (1..=modes)
            .map(|j| sigma * (j as f64).powf(-decay_p))
            .collect();
        Ok(Self {
            coefficients,
            sigma,
            decay_p,
        })
    }

    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        let sigma = coefficients.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        Self {
            coefficients,
            sigma,
            decay_p: 0.0,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn modes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn decay_p(&self) -> f64 {
        self.decay_p
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
            sigma: self.sigma * s,
            decay_p: self.decay_p,
        }
    }

    /// Truncated Σ μ_j² ‖e_j‖²_{C²_b}.
    pub fn c2_summability(&self, basis: &OrthonormalBasis) -> Result<f64> {
        check_modes(basis, self)?;
        Ok(self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, m)| m * m * basis.c2_norm(j).powi(2))
            .sum())
    }

    /// Truncated Σ μ_j² (|e_j|²∞ + |∇e_j|²∞).
    pub fn c1_summability(&self, basis: &OrthonormalBasis) -> Result<f64> {
        check_modes(basis, self)?;
        Ok(self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, m)| m * m * basis.c1_norm_sq(j))
            .sum())
    }
}

fn check_modes(basis: &OrthonormalBasis, spec: &NoiseSpec) -> Result<()> {
    if basis.modes() != spec.modes() {
        return Err(Error::Config(format!(
            "basis has {} modes but noise spec has {}",
            basis.modes(),
            spec.modes()
        )));
    }
    Ok(())
}

/// Uniform time grid 0 = t_0 < … < t_steps = horizon.
pub fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|m| horizon * m as f64 / steps as f64)
        .collect()
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::Config("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Box–Muller normal from the two 64-bit words at position `2 * step` of the
/// ChaCha stream selected by `(seed, mode)`. Each draw is addressed by
/// (seed, mode, step) alone.
pub(crate) struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub(crate) fn new(seed: u64, mode: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(mode as u64);
        Self { rng }
    }

    /// Uniform on (0, 1).
    pub(crate) fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn next(&mut self) -> f64 {
        let to_unit = |w: u64| ((w >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        let u1 = to_unit(self.rng.next_u64());
        let u2 = to_unit(self.rng.next_u64());
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// Sampled Brownian coefficient paths together with basis and amplitudes.
#[derive(Debug, Clone)]
pub struct WienerField {
    basis: Arc<OrthonormalBasis>,
    spec: NoiseSpec,
    times: Vec<f64>,
    /// paths[j][m] = β_j(t_m).
    paths: Vec<Vec<f64>>,
    seed: u64,
}

/// W, ∇W and D²W on the grid at one time node. On the torus only `w` is
/// populated.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerSample {
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub d2w: Vec<f64>,
}

pub fn sample_brownian(
    basis: Arc<OrthonormalBasis>,
    spec: NoiseSpec,
    times: Vec<f64>,
    seed: u64,
) -> Result<WienerField> {
    validate_times(&times)?;
    check_modes(&basis, &spec)?;
    let paths = (0..spec.modes())
        .map(|j| {
            let mut stream = NormalStream::new(seed, j);
            let mut path = Vec::with_capacity(times.len());
            path.push(0.0);
            let mut b = 0.0;
            for w in times.windows(2) {
                b += (w[1] - w[0]).sqrt() * stream.next();
                path.push(b);
            }
            path
        })
        .collect();
    Ok(WienerField {
        basis,
        spec,
        times,
        paths,
        seed,
    })
}

impl WienerField {
    /// Field with all β_j ≡ 0.
    pub fn zero(basis: Arc<OrthonormalBasis>, spec: NoiseSpec, times: Vec<f64>) -> Result<Self> {
        validate_times(&times)?;
        check_modes(&basis, &spec)?;
        let paths = vec![vec![0.0; times.len()]; spec.modes()];
        Ok(Self {
            basis,
            spec,
            times,
            paths,
            seed: 0,
        })
    }

    /// Field with prescribed coefficient paths.
    pub fn from_paths(
        basis: Arc<OrthonormalBasis>,
        spec: NoiseSpec,
        times: Vec<f64>,
        paths: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_times(&times)?;
        check_modes(&basis, &spec)?;
        if paths.len() != spec.modes() || paths.iter().any(|p| p.len() != times.len()) {
            return Err(Error::Config(
                "path array shape does not match modes x time nodes".into(),
            ));
        }
        Ok(Self {
            basis,
            spec,
            times,
            paths,
            seed: 0,
        })
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<OrthonormalBasis> {
        Arc::clone(&self.basis)
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, j: usize) -> &[f64] {
        &self.paths[j]
    }

    /// Same Brownian paths with every μ_j multiplied by `s`.
    pub fn with_scaled_amplitude(&self, s: f64) -> Self {
        Self {
            spec: self.spec.scaled(s),
            ..self.clone()
        }
    }

    /// Same Brownian paths with a different amplitude vector.
    pub fn with_spec(&self, spec: NoiseSpec) -> Result<Self> {
        check_modes(&self.basis, &spec)?;
        Ok(Self {
            spec,
            ..self.clone()
        })
    }

    /// Every `stride`-th node of this field: the same Brownian path on a
    /// coarser time grid.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.steps() % stride != 0 {
            return Err(Error::Config(format!(
                "stride {stride} does not divide {} steps",
                self.steps()
            )));
        }
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        Ok(Self {
            basis: Arc::clone(&self.basis),
            spec: self.spec.clone(),
            times: pick(&self.times),
            paths: self.paths.iter().map(pick).collect(),
            seed: self.seed,
        })
    }

    /// Index of time node `t`; exact match required.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        self.times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .map_err(|_| Error::NotGridNode(t))
    }

    /// W, ∇W, D²W at node index `m`.
    pub fn eval_at(&self, m: usize) -> WienerSample {
        let len = self.basis.grid_len();
        let mut w = vec![0.0; len];
        let interval = matches!(self.basis.domain(), Domain::Interval(_));
        let (mut dw, mut d2w) = if interval {
            (vec![0.0; len], vec![0.0; len])
        } else {
            (Vec::new(), Vec::new())
        };
        for (j, mu) in self.spec.coefficients().iter().enumerate() {
            let c = mu * self.paths[j][m];
            if c == 0.0 {
                continue;
            }
            axpy(c, self.basis.values(j), &mut w);
            if interval {
                axpy(c, self.basis.first_derivative(j), &mut dw);
                axpy(c, self.basis.second_derivative(j), &mut d2w);
            }
        }
        WienerSample { w, dw, d2w }
    }

    /// W(t_{m+1}, ·) − W(t_m, ·).
    pub fn increment(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.grid_len()];
        for (j, mu) in self.spec.coefficients().iter().enumerate() {
            let c = mu * (self.paths[j][m + 1] - self.paths[j][m]);
            if c != 0.0 {
                axpy(c, self.basis.values(j), &mut out);
            }
        }
        out
    }
}

/// Evaluate W and its derivatives at time `t`, which must be a grid node.
pub fn eval_wiener(field: &WienerField, t: f64) -> Result<WienerSample> {
    Ok(field.eval_at(field.node_index(t)?))
}

/// Itô correction μ(ξ) = ½ Σ_j μ_j² e_j(ξ)².
pub fn ito_correction(basis: &OrthonormalBasis, spec: &NoiseSpec) -> Result<Vec<f64>> {
    check_modes(basis, spec)?;
    let mut out = vec![0.0; basis.grid_len()];
    for (j, mu) in spec.coefficients().iter().enumerate() {
        for (o, e) in out.iter_mut().zip(basis.values(j)) {
            *o += 0.5 * mu * mu * e * e;
        }
    }
    Ok(out)
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(n: usize, modes: usize) -> Arc<OrthonormalBasis> {
        Arc::new(build_basis(Domain::Interval(Grid1D::new(n).unwrap()), modes).unwrap())
    }

    #[test]
    fn first_mode_is_normalised_sine() {
        let b = interval(64, 1);
        let g = Grid1D::new(64).unwrap();
        let expected = g.sample(|x| (2.0 / PI).sqrt() * x.sin());
        for (a, e) in b.values(0).iter().zip(&expected) {
            assert!((a - e).abs() < 1e-15);
        }
        assert!(b.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn two_modes_are_orthogonal() {
        let b = interval(32, 2);
        let g = Grid1D::new(32).unwrap();
        assert!(g.inner(b.values(0), b.values(1)).abs() < 1e-12);
    }

    #[test]
    fn orthonormality_at_256_nodes() {
        let b = interval(256, 3);
        let h = PI / 257.0;
        assert!(b.orthonormality_defect() <= 1e-3);
        assert!(b.orthonormality_defect() <= 10.0 * h * h);
    }

    #[test]
    fn modes_vanish_on_boundary() {
        let g = Grid1D::new(40).unwrap();
        for j in 1..=5 {
            let v = (2.0 / PI).sqrt() * (j as f64 * PI).sin();
            assert!(v.abs() < 1e-14);
            // the first interior node is O(h) from the boundary
            let b = interval(40, 5);
            assert!(b.values(j - 1)[0].abs() <= (2.0 / PI).sqrt() * j as f64 * g.spacing() + 1e-15);
        }
    }

    #[test]
    fn coarse_resolution_rejected() {
        let err = build_basis(Domain::Interval(Grid1D::new(16).unwrap()), 5);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(matches!(
            build_basis(Domain::Torus { m: 8 }, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn torus_basis_orthonormal() {
        let b = build_basis(Domain::Torus { m: 8 }, 8).unwrap();
        assert!(b.orthonormality_defect() < 1e-12);
        let m = torus_modes(8);
        assert_eq!(m[0].wave, [0, 0, 0]);
        assert_eq!(
            m[1],
            TorusMode {
                wave: [1, 0, 0],
                sine: false
            }
        );
        assert_eq!(
            m[2],
            TorusMode {
                wave: [1, 0, 0],
                sine: true
            }
        );
        assert_eq!(m[7].wave, [1, 1, 0]);
    }

    #[test]
    fn brownian_starts_at_zero() {
        let b = interval(16, 3);
        let spec = NoiseSpec::power_law(3, 1.0, 1.0).unwrap();
        let f = sample_brownian(b, spec, vec![0.0], 11).unwrap();
        for j in 0..3 {
            assert_eq!(f.path(j), &[0.0]);
        }
    }

    #[test]
    fn increment_variance_within_band() {
        let b = interval(8, 1);
        let spec = NoiseSpec::power_law(1, 1.0, 0.0).unwrap();
        let dt = 1e-3;
        let f = sample_brownian(b, spec, uniform_times(10.0, 10_000), 2024).unwrap();
        let p = f.path(0);
        let incs: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = incs.iter().sum::<f64>() / incs.len() as f64;
        let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (incs.len() - 1) as f64;
        assert!(var >= 0.8 * dt && var <= 1.2 * dt, "variance {var}");
    }

    #[test]
    fn sampling_is_deterministic_and_mode_count_independent() {
        let times = uniform_times(1.0, 50);
        let f2 = sample_brownian(
            interval(16, 2),
            NoiseSpec::power_law(2, 1.0, 1.0).unwrap(),
            times.clone(),
            9,
        )
        .unwrap();
        let f2b = sample_brownian(
            interval(16, 2),
            NoiseSpec::power_law(2, 1.0, 1.0).unwrap(),
            times.clone(),
            9,
        )
        .unwrap();
        let f4 = sample_brownian(
            interval(16, 4),
            NoiseSpec::power_law(4, 1.0, 1.0).unwrap(),
            times,
            9,
        )
        .unwrap();
        for j in 0..2 {
            assert_eq!(f2.path(j), f2b.path(j));
            assert_eq!(f2.path(j), f4.path(j));
        }
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let spec = NoiseSpec::power_law(1, 1.0, 1.0).unwrap();
        assert!(matches!(
            sample_brownian(interval(8, 1), spec.clone(), vec![0.0, 0.5, 0.4], 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            sample_brownian(interval(8, 1), spec, vec![0.1, 0.5], 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_path_gives_zero_field() {
        let b = interval(32, 3);
        let f = WienerField::zero(
            b,
            NoiseSpec::power_law(3, 1.0, 1.0).unwrap(),
            uniform_times(1.0, 4),
        )
        .unwrap();
        let s = eval_wiener(&f, 0.5).unwrap();
        assert!(s.w.iter().chain(&s.dw).all(|&x| x == 0.0));
    }

    #[test]
    fn single_mode_substitution() {
        let b = interval(64, 1);
        let g = Grid1D::new(64).unwrap();
        let spec = NoiseSpec::from_coefficients(vec![2.0]);
        let f = WienerField::from_paths(b, spec, vec![0.0, 1.0], vec![vec![0.0, 3.0]]).unwrap();
        let s = eval_wiener(&f, 1.0).unwrap();
        let expected = g.sample(|x| 6.0 * (2.0 / PI).sqrt() * x.sin());
        for i in 0..64 {
            assert!((s.w[i] - expected[i]).abs() < 1e-13);
            assert!((s.d2w[i] + s.w[i]).abs() < 1e-13);
        }
        assert!(matches!(eval_wiener(&f, 0.3), Err(Error::NotGridNode(_))));
    }

    #[test]
    fn ito_correction_values() {
        let b = interval(64, 1);
        let g = Grid1D::new(64).unwrap();
        let sigma = 0.7;
        let mu = ito_correction(&b, &NoiseSpec::from_coefficients(vec![sigma])).unwrap();
        for (i, v) in mu.iter().enumerate() {
            let x = g.node(i);
            assert!((v - sigma * sigma * x.sin().powi(2) / PI).abs() < 1e-14);
        }
        let zero = ito_correction(&b, &NoiseSpec::from_coefficients(vec![0.0])).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(matches!(
            ito_correction(&b, &NoiseSpec::from_coefficients(vec![1.0, 1.0])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn subsample_keeps_path() {
        let b = interval(8, 1);
        let f = sample_brownian(
            b,
            NoiseSpec::power_law(1, 1.0, 0.0).unwrap(),
            uniform_times(1.0, 8),
            5,
        )
        .unwrap();
        let c = f.subsample(4).unwrap();
        assert_eq!(c.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(c.path(0), &[f.path(0)[0], f.path(0)[4], f.path(0)[8]]);
        assert!(f.subsample(3).is_err());
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let n = 200;
        let g = Grid1D::new(n).unwrap();
        let b = interval(n, 3);
        let f = sample_brownian(
            b,
            NoiseSpec::power_law(3, 1.0, 1.0).unwrap(),
            uniform_times(1.0, 10),
            3,
        )
        .unwrap();
        let s = f.eval_at(10);
        let h = g.spacing();
        for i in 1..n - 1 {
            let fd = (s.w[i + 1] - 2.0 * s.w[i] + s.w[i - 1]) / (h * h);
            assert!((fd - s.d2w[i]).abs() < 20.0 * h * h, "node {i}");
        }
    }

    #[test]
    fn summability_nondecreasing_in_modes() {
        let mut last = 0.0;
        for modes in 1..=6 {
            let b = interval(64, modes);
            let v = NoiseSpec::power_law(modes, 0.3, 2.0)
                .unwrap()
                .c2_summability(&b)
                .unwrap();
            assert!(v >= last);
            last = v;
        }
    }
}
