use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::TorusMode;

use super::spectral::{FourierVelocity, Lattice, SpectralTransform, WaveTable};

/// Energy above which a Galerkin path counts as blown up.
pub const NSE_BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NseParams {
    pub nu: f64,
    /// Taming threshold N.
    pub n_tame: f64,
    pub taming: bool,
    pub advection: bool,
}

impl Default for NseParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            n_tame: 10.0,
            taming: true,
            advection: true,
        }
    }
}

/// C¹ taming function: 0 on [0, N], g' rising linearly from 0 to 1/ν on
/// [N, N + 1], then slope 1/ν.
pub fn taming_g(r: f64, n: f64, nu: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Config(format!("taming argument {r} must be >= 0")));
    }
    if !(n >= 1.0) || !(nu > 0.0) {
        return Err(Error::Config(format!(
            "taming needs N >= 1 and nu > 0 (got N = {n}, nu = {nu})"
        )));
    }
    Ok(taming_unchecked(r, n, nu))
}

fn taming_unchecked(r: f64, n: f64, nu: f64) -> f64 {
    if r <= n {
        0.0
    } else if r <= n + 1.0 {
        (r - n) * (r - n) / (2.0 * nu)
    } else {
        (r - n - 1.0) / nu + 1.0 / (2.0 * nu)
    }
}

/// Multiplicative noise u ↦ Σ_j μ_j Δβ_j u e_j on the lattice, evaluated by
/// exact convolution with the few trigonometric modes.
#[derive(Debug, Clone)]
pub struct NoiseForcing {
    pub modes: Vec<TorusMode>,
    pub amplitudes: Vec<f64>,
}

impl NoiseForcing {
    pub fn apply(&self, u: &FourierVelocity, dbeta: &[f64]) -> FourierVelocity {
        let maps = NeighbourMaps::new(u.lattice(), &self.modes);
        let mut out = FourierVelocity::zeros(u.k_max());
        self.apply_with(&maps, u, dbeta, &mut out);
        out
    }

    fn apply_with(
        &self,
        maps: &NeighbourMaps,
        u: &FourierVelocity,
        dbeta: &[f64],
        out: &mut FourierVelocity,
    ) {
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        for (j, (mode, (mu, db))) in self
            .modes
            .iter()
            .zip(self.amplitudes.iter().zip(dbeta))
            .enumerate()
        {
            let c = mu * db;
            if c == 0.0 {
                continue;
            }
            if mode.wave == [0, 0, 0] {
                out.axpy(c, u);
                continue;
            }
            // √2 cos = (e⁺ + e⁻)/√2, √2 sin = −i (e⁺ − e⁻)/√2
            let (plus, minus) = if mode.sine {
                (Complex64::new(0.0, -c * r2), Complex64::new(0.0, c * r2))
            } else {
                (Complex64::new(c * r2, 0.0), Complex64::new(c * r2, 0.0))
            };
            for comp in 0..3 {
                let src = &u.comps[comp];
                let dst = &mut out.comps[comp];
                for &(d, s) in &maps.below[j] {
                    dst[d as usize] += plus * src[s as usize];
                }
                for &(d, s) in &maps.above[j] {
                    dst[d as usize] += minus * src[s as usize];
                }
            }
        }
    }

    pub fn is_silent(&self, dbeta: &[f64]) -> bool {
        self.amplitudes.iter().zip(dbeta).all(|(m, b)| m * b == 0.0)
    }
}

/// For each noise mode with wave w: the pairs (index of k, index of k − w)
/// and (index of k, index of k + w) that stay on the lattice.
#[derive(Debug, Clone)]
struct NeighbourMaps {
    below: Vec<Vec<(u32, u32)>>,
    above: Vec<Vec<(u32, u32)>>,
}

impl NeighbourMaps {
    fn new(lat: Lattice, modes: &[TorusMode]) -> Self {
        let shift = |sign: i32, w: [i32; 3]| -> Vec<(u32, u32)> {
            (0..lat.len())
                .filter_map(|i| {
                    let k = lat.wave(i);
                    let q = [k[0] + sign * w[0], k[1] + sign * w[1], k[2] + sign * w[2]];
                    lat.contains(q).then(|| (i as u32, lat.index(q) as u32))
                })
                .collect()
        };
        Self {
            below: modes.iter().map(|m| shift(-1, m.wave)).collect(),
            above: modes.iter().map(|m| shift(1, m.wave)).collect(),
        }
    }
}

/// Pseudo-spectral Galerkin integrator on one dealiased grid.
pub struct GalerkinSolver {
    transform: SpectralTransform,
    params: NseParams,
    noise: NoiseForcing,
    maps: NeighbourMaps,
    table: WaveTable,
    grid: [Vec<f64>; 6],
    products: [Vec<f64>; 3],
    speed: Vec<f64>,
    /// Noise modes sampled on the grid; empty when some wave reaches past
    /// K and the grid product would alias onto the lattice.
    mode_grid: Vec<Vec<f64>>,
    multiplier: Vec<f64>,
    vorticity: [Vec<Complex64>; 3],
    /// 1/(1 + νΔt|k|²) for the Δt in `damp_dt`.
    damp: Vec<f64>,
    damp_dt: f64,
    /// max_x |u(x)|² of the state passed to the last drift evaluation.
    last_max_speed_sq: f64,
}

impl GalerkinSolver {
    pub fn new(k_max: usize, params: NseParams, noise: NoiseForcing) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::Config("nse.K must be at least 1".into()));
        }
        if !(params.nu > 0.0) || !(params.n_tame >= 1.0) {
            return Err(Error::Config(format!(
                "need nu > 0 and N_tame >= 1 (got nu = {}, N_tame = {})",
                params.nu, params.n_tame
            )));
        }
        let lattice = Lattice::new(k_max);
        let transform = SpectralTransform::dealiased(lattice);
        let m = transform.points();
        let n = m.pow(3);
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let exact = noise
            .modes
            .iter()
            .all(|md| md.wave.iter().all(|w| w.unsigned_abs() as usize <= k_max));
        let mode_grid = if exact {
            noise
                .modes
                .iter()
                .map(|md| {
                    (0..n)
                        .map(|i| {
                            let x = [i / (m * m), (i / m) % m, i % m];
                            md.eval(x.map(|v| v as f64 * h))
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            transform,
            params,
            maps: NeighbourMaps::new(lattice, &noise.modes),
            noise,
            table: WaveTable::new(lattice),
            grid: std::array::from_fn(|_| vec![0.0; n]),
            products: std::array::from_fn(|_| vec![0.0; n]),
            speed: vec![0.0; n],
            mode_grid,
            multiplier: vec![0.0; n],
            vorticity: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); lattice.len()]),
            damp: Vec::new(),
            damp_dt: f64::NAN,
            last_max_speed_sq: 0.0,
        })
    }

    pub fn params(&self) -> NseParams {
        self.params
    }

    pub fn last_max_speed_sq(&self) -> f64 {
        self.last_max_speed_sq
    }

    fn velocity_and_vorticity(&mut self, u: &FourierVelocity, with_vorticity: bool) {
        let lat = u.lattice();
        let [g0, g1, g2, g3, g4, g5] = &mut self.grid;
        self.transform
            .real_pair_to_grid(&u.comps[0], Some(&u.comps[1]), g0, g1);
        if !with_vorticity {
            self.transform.real_pair_to_grid(&u.comps[2], None, g2, g3);
            return;
        }
        let i = Complex64::new(0.0, 1.0);
        let w = &mut self.vorticity;
        for idx in 0..lat.len() {
            let k = self.table.waves[idx];
            let v = [u.comps[0][idx], u.comps[1][idx], u.comps[2][idx]];
            w[0][idx] = i * (k[1] * v[2] - k[2] * v[1]);
            w[1][idx] = i * (k[2] * v[0] - k[0] * v[2]);
            w[2][idx] = i * (k[0] * v[1] - k[1] * v[0]);
        }
        self.transform
            .real_pair_to_grid(&u.comps[2], Some(&w[0]), g2, g3);
        self.transform.real_pair_to_grid(&w[1], Some(&w[2]), g4, g5);
    }

    /// Unprojected `scale`·(ω×u + g_N(|u|²)u) on the lattice, plus the
    /// pointwise noise product m·u when `with_noise` (m from `multiplier`),
    /// with the drift terms switched by the parameters; `None` when every
    /// term is off or vanishes.
    fn drift_unprojected(
        &mut self,
        u: &FourierVelocity,
        scale: f64,
        with_noise: bool,
    ) -> Option<FourierVelocity> {
        let p = self.params;
        if !p.advection && !p.taming {
            self.last_max_speed_sq = f64::NAN;
            return None;
        }
        self.velocity_and_vorticity(u, p.advection);
        let mut c = std::mem::take(&mut self.products);
        let mut speed = std::mem::take(&mut self.speed);
        let [u0, u1, u2, w0, w1, w2] = &self.grid;
        let [c0, c1, c2] = &mut c;
        if p.advection {
            for (x, (c0, (c1, c2))) in c0
                .iter_mut()
                .zip(c1.iter_mut().zip(c2.iter_mut()))
                .enumerate()
            {
                *c0 = scale * (w1[x] * u2[x] - w2[x] * u1[x]);
                *c1 = scale * (w2[x] * u0[x] - w0[x] * u2[x]);
                *c2 = scale * (w0[x] * u1[x] - w1[x] * u0[x]);
            }
        } else {
            [&mut *c0, &mut *c1, &mut *c2]
                .iter_mut()
                .for_each(|v| v.fill(0.0));
        }
        let mut max_sq = 0.0_f64;
        let mut tamed = false;
        for (r, ((a, b), c)) in speed.iter_mut().zip(u0.iter().zip(u1).zip(u2)) {
            *r = a * a + b * b + c * c;
            max_sq = max_sq.max(*r);
        }
        self.last_max_speed_sq = max_sq;
        if p.taming && max_sq > p.n_tame {
            for x in 0..speed.len() {
                let g = taming_unchecked(speed[x], p.n_tame, p.nu);
                if g != 0.0 {
                    tamed = true;
                    c0[x] += scale * g * u0[x];
                    c1[x] += scale * g * u1[x];
                    c2[x] += scale * g * u2[x];
                }
            }
        }
        if with_noise {
            for (x, m) in self.multiplier.iter().enumerate() {
                c0[x] += m * u0[x];
                c1[x] += m * u1[x];
                c2[x] += m * u2[x];
            }
        }
        let out = if !p.advection && !tamed && !with_noise {
            None
        } else {
            let mut out = FourierVelocity::zeros(u.k_max());
            let [o0, o1, o2] = &mut out.comps;
            self.transform.real_pair_to_lattice(c0, Some(c1), o0, o1);
            self.transform.real_pair_to_lattice(c2, None, o2, &mut []);
            Some(out)
        };
        self.products = c;
        self.speed = speed;
        out
    }

    /// Π((u·∇)u) computed as Π(ω×u) on the dealiased grid.
    pub fn nonlinear_term(&mut self, u: &FourierVelocity) -> FourierVelocity {
        let saved = self.params;
        self.params = NseParams {
            advection: true,
            taming: false,
            ..saved
        };
        let mut out = self
            .drift_unprojected(u, 1.0, false)
            .expect("advection is on");
        self.params = saved;
        self.table.project(&mut out);
        out
    }

    /// One IMEX Euler–Maruyama step:
    /// (1 + νΔt|k|²) û⁺ = Π[û − Δt(ω×u + g_N(|u|²)u) + Σ μ_j Δβ_j u e_j].
    pub fn step(
        &mut self,
        u: &FourierVelocity,
        dt: f64,
        dbeta: &[f64],
        step_index: usize,
    ) -> Result<FourierVelocity> {
        let mut next = u.clone();
        let silent = self.noise.is_silent(dbeta);
        let p = self.params;
        let pointwise = !silent && !self.mode_grid.is_empty() && (p.advection || p.taming);
        if pointwise {
            self.multiplier.fill(0.0);
            for ((e, mu), db) in self.mode_grid.iter().zip(&self.noise.amplitudes).zip(dbeta) {
                let c = mu * db;
                for (m, e) in self.multiplier.iter_mut().zip(e) {
                    *m += c * e;
                }
            }
        }
        if let Some(d) = self.drift_unprojected(u, -dt, pointwise) {
            next.axpy(1.0, &d);
        }
        if !silent && !pointwise {
            self.noise.apply_with(&self.maps, u, dbeta, &mut next);
        }
        self.table.project(&mut next);
        if self.damp_dt != dt {
            let nu = self.params.nu;
            self.damp = self
                .table
                .norm_sq
                .iter()
                .map(|kk| 1.0 / (1.0 + nu * dt * kk))
                .collect();
            self.damp_dt = dt;
        }
        for c in next.comps.iter_mut() {
            for (z, d) in c.iter_mut().zip(&self.damp) {
                *z *= d;
            }
        }
        let e = next.l2_sq();
        if !(e <= NSE_BLOW_UP) {
            return Err(Error::Numerical {
                step: step_index,
                reason: format!("energy {e:e} exceeds blow-up threshold"),
            });
        }
        Ok(next)
    }

    /// (mean over the grid of |u|⁴ + |∇u|⁴)^{1/4} with |∇u| the Frobenius
    /// norm of the velocity gradient.
    pub fn w14_norm(&mut self, u: &FourierVelocity) -> f64 {
        self.w14_and_max_speed_sq(u).0
    }

    /// `w14_norm` and `max_speed_sq` from one set of transforms.
    pub fn w14_and_max_speed_sq(&mut self, u: &FourierVelocity) -> (f64, f64) {
        let lat = u.lattice();
        let n = self.grid[0].len();
        let i = Complex64::new(0.0, 1.0);
        let mut grad_sq = vec![0.0; n];
        let mut speed_sq = vec![0.0; n];
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        // nine derivative fields and three velocity fields, two per transform
        let mut fields: Vec<(Vec<Complex64>, bool)> = Vec::with_capacity(12);
        for comp in 0..3 {
            fields.push((u.comps[comp].clone(), false));
            for dir in 0..3 {
                let d: Vec<Complex64> = (0..lat.len())
                    .map(|idx| i * self.table.waves[idx][dir] * u.comps[comp][idx])
                    .collect();
                fields.push((d, true));
            }
        }
        for pair in fields.chunks(2) {
            self.transform
                .real_pair_to_grid(&pair[0].0, Some(&pair[1].0), &mut a, &mut b);
            for (vals, is_grad) in [(&a, pair[0].1), (&b, pair[1].1)] {
                let target = if is_grad { &mut grad_sq } else { &mut speed_sq };
                for (t, v) in target.iter_mut().zip(vals.iter()) {
                    *t += v * v;
                }
            }
        }
        let sum: f64 = speed_sq
            .iter()
            .zip(&grad_sq)
            .map(|(s, g)| s * s + g * g)
            .sum();
        let max_sq = speed_sq.iter().copied().fold(0.0, f64::max);
        ((sum / n as f64).powf(0.25), max_sq)
    }

    /// max_x |u(x)|² on the dealiased grid.
    pub fn max_speed_sq(&mut self, u: &FourierVelocity) -> f64 {
        self.velocity_and_vorticity(u, false);
        let [u0, u1, u2, ..] = &self.grid;
        (0..u0.len())
            .map(|x| u0[x] * u0[x] + u1[x] * u1[x] + u2[x] * u2[x])
            .fold(0.0, f64::max)
    }
}

/// Π((u·∇)u) for a single field.
pub fn nonlinear_term(u: &FourierVelocity) -> FourierVelocity {
    let mut solver = GalerkinSolver::new(
        u.k_max(),
        NseParams::default(),
        NoiseForcing {
            modes: Vec::new(),
            amplitudes: Vec::new(),
        },
    )
    .expect("default parameters are valid");
    solver.nonlinear_term(u)
}
