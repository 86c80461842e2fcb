use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Truncated lattice {k ∈ ℤ³ : |k_i| ≤ K} stored densely, index
/// ((k₁+K)·L + k₂+K)·L + k₃+K with L = 2K + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    k_max: usize,
}

impl Lattice {
    pub fn new(k_max: usize) -> Self {
        Self { k_max }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn side(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: [i32; 3]) -> bool {
        let km = self.k_max as i32;
        k.iter().all(|&c| c.abs() <= km)
    }

    pub fn index(&self, k: [i32; 3]) -> usize {
        let km = self.k_max as i32;
        let l = self.side();
        (((k[0] + km) as usize * l) + (k[1] + km) as usize) * l + (k[2] + km) as usize
    }

    pub fn wave(&self, idx: usize) -> [i32; 3] {
        let l = self.side();
        let km = self.k_max as i32;
        [
            (idx / (l * l)) as i32 - km,
            ((idx / l) % l) as i32 - km,
            (idx % l) as i32 - km,
        ]
    }

    /// Index of −k.
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Physical points per axis that resolve products of two lattice fields
    /// without aliasing into the lattice.
    pub fn dealiased_points(&self) -> usize {
        3 * self.k_max + 1
    }
}

pub fn norm_sq(k: [i32; 3]) -> f64 {
    k.iter().map(|&c| (c * c) as f64).sum()
}

/// Velocity coefficients û_k ∈ ℂ³ on the lattice, one array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVelocity {
    lattice: Lattice,
    pub comps: [Vec<Complex64>; 3],
}

impl FourierVelocity {
    pub fn zeros(k_max: usize) -> Self {
        let lattice = Lattice::new(k_max);
        let z = vec![Complex64::new(0.0, 0.0); lattice.len()];
        Self {
            lattice,
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn k_max(&self) -> usize {
        self.lattice.k_max
    }

    pub fn get(&self, k: [i32; 3]) -> [Complex64; 3] {
        let i = self.lattice.index(k);
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    /// Lattice projection of a real field sampled on the dealiased grid. Exact
    /// for fields whose spectrum lies in the lattice.
    pub fn from_physical(k_max: usize, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let lattice = Lattice::new(k_max);
        let mut tr = SpectralTransform::dealiased(lattice);
        let m = tr.points();
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let mut vals: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; m * m * m]);
        for x1 in 0..m {
            for x2 in 0..m {
                for x3 in 0..m {
                    let v = f([x1 as f64 * h, x2 as f64 * h, x3 as f64 * h]);
                    let idx = (x1 * m + x2) * m + x3;
                    for c in 0..3 {
                        vals[c][idx] = v[c];
                    }
                }
            }
        }
        let mut out = Self::zeros(k_max);
        let [o0, o1, o2] = &mut out.comps;
        tr.real_pair_to_lattice(&vals[0], Some(&vals[1]), o0, o1);
        tr.real_pair_to_lattice(&vals[2], None, o2, &mut []);
        out
    }

    /// Sets û_k and û_{−k} = conj(û_k).
    pub fn set_real_mode(&mut self, k: [i32; 3], v: [Complex64; 3]) {
        let i = self.lattice.index(k);
        let j = self.lattice.mirror(i);
        for c in 0..3 {
            self.comps[c][i] = v[c];
            self.comps[c][j] = v[c].conj();
        }
    }

    /// |u|² = Σ_k |û_k|² (mean-normalised L² norm).
    pub fn l2_sq(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// ‖u‖² = Σ_k |k|² |û_k|².
    pub fn energy_sq(&self) -> f64 {
        self.weighted_sq(norm_sq)
    }

    /// Σ_k (1 + |k|²)² |û_k|².
    pub fn h2_sq(&self) -> f64 {
        self.weighted_sq(|k| (1.0 + norm_sq(k)).powi(2))
    }

    fn weighted_sq(&self, w: impl Fn([i32; 3]) -> f64) -> f64 {
        (0..self.lattice.len())
            .map(|i| {
                let s: f64 = self.comps.iter().map(|c| c[i].norm_sqr()).sum();
                if s == 0.0 {
                    0.0
                } else {
                    w(self.lattice.wave(i)) * s
                }
            })
            .sum()
    }

    /// max over modes of |k·û_k| / |û_k|.
    pub fn divergence_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.lattice.len() {
            let k = self.lattice.wave(i);
            let mag: f64 = self
                .comps
                .iter()
                .map(|c| c[i].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if mag == 0.0 {
                continue;
            }
            let div: Complex64 = (0..3).map(|c| self.comps[c][i] * k[c] as f64).sum();
            worst = worst.max(div.norm() / mag);
        }
        worst
    }

    /// max over modes of |û_{−k} − conj(û_k)|.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for c in &self.comps {
            for i in 0..self.lattice.len() {
                worst = worst.max((c[self.lattice.mirror(i)] - c[i].conj()).norm());
            }
        }
        worst
    }

    pub fn axpy(&mut self, a: f64, other: &FourierVelocity) {
        for c in 0..3 {
            for (x, y) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *x += a * y;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            for x in c.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    pub fn sub(&self, other: &FourierVelocity) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Leray projection v − k(k·v)/|k|² per mode; the mean mode is dropped.
pub fn leray_project(v: &FourierVelocity) -> FourierVelocity {
    let mut out = v.clone();
    leray_in_place(&mut out);
    out
}

pub(crate) fn leray_in_place(v: &mut FourierVelocity) {
    let table = WaveTable::new(v.lattice);
    table.project(v);
}

/// Wave vectors and |k|² per lattice index.
#[derive(Debug, Clone)]
pub struct WaveTable {
    pub waves: Vec<[f64; 3]>,
    pub norm_sq: Vec<f64>,
}

impl WaveTable {
    pub fn new(lattice: Lattice) -> Self {
        let waves: Vec<[f64; 3]> = (0..lattice.len())
            .map(|i| lattice.wave(i).map(f64::from))
            .collect();
        let norm_sq = waves
            .iter()
            .map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
            .collect();
        Self { waves, norm_sq }
    }

    /// Removes k(k·v)/|k|² per mode. A second pass removes the round-off
    /// left when v is nearly parallel to k.
    pub fn project(&self, v: &mut FourierVelocity) {
        let [a, b, c] = &mut v.comps;
        for i in 0..self.waves.len() {
            let kk = self.norm_sq[i];
            if kk == 0.0 {
                a[i] = Complex64::new(0.0, 0.0);
                b[i] = Complex64::new(0.0, 0.0);
                c[i] = Complex64::new(0.0, 0.0);
                continue;
            }
            let k = self.waves[i];
            for _ in 0..2 {
                let dot = (a[i] * k[0] + b[i] * k[1] + c[i] * k[2]) / kk;
                a[i] -= dot * k[0];
                b[i] -= dot * k[1];
                c[i] -= dot * k[2];
            }
        }
    }
}

/// Transforms between lattice coefficients and values on an m³ periodic
/// grid with x_j = 2πj/m. Only lattice lines are transformed.
pub struct SpectralTransform {
    lattice: Lattice,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    lines: Vec<Complex64>,
    packed: Vec<Complex64>,
    grid: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// lattice index i ↔ k = i − K ↔ grid frequency k mod m
    wrap: Vec<usize>,
}

impl SpectralTransform {
    pub fn new(lattice: Lattice, m: usize) -> Self {
        assert!(m >= lattice.side(), "grid must hold the lattice");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Self {
            lattice,
            m,
            forward,
            inverse,
            buf: vec![zero; m * m * m],
            lines: vec![zero; lattice.side() * m * m],
            packed: vec![zero; lattice.len()],
            grid: vec![zero; m * m * m],
            scratch: vec![zero; scratch_len],
            wrap: (0..lattice.side())
                .map(|i| (i as i64 - lattice.k_max as i64).rem_euclid(m as i64) as usize)
                .collect(),
        }
    }

    pub fn dealiased(lattice: Lattice) -> Self {
        Self::new(lattice, lattice.dealiased_points())
    }

    pub fn points(&self) -> usize {
        self.m
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Σ_k c_k e^{ik·x} at every grid point, for complex lattice data `c`.
    pub fn to_grid(&mut self, c: &[Complex64], out: &mut [Complex64]) {
        let (l, m) = (self.lattice.side(), self.m);
        let zero = Complex64::new(0.0, 0.0);
        let wrap = std::mem::take(&mut self.wrap);
        // axis 3: lines (i1, i2)
        let buf = &mut self.buf[..l * l * m];
        buf.fill(zero);
        for line in 0..l * l {
            for i3 in 0..l {
                buf[line * m + wrap[i3]] = c[line * l + i3];
            }
        }
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        // axis 2: lines (i1, x3)
        let lines = &mut self.lines;
        lines.fill(zero);
        for i1 in 0..l {
            for i2 in 0..l {
                let src = &self.buf[(i1 * l + i2) * m..(i1 * l + i2 + 1) * m];
                for x3 in 0..m {
                    lines[(i1 * m + x3) * m + wrap[i2]] = src[x3];
                }
            }
        }
        self.inverse.process_with_scratch(lines, &mut self.scratch);
        // axis 1: lines (x2, x3)
        let buf = &mut self.buf[..];
        buf.fill(zero);
        for i1 in 0..l {
            let w = wrap[i1];
            for x3 in 0..m {
                let src = &lines[(i1 * m + x3) * m..(i1 * m + x3 + 1) * m];
                for (x2, v) in src.iter().enumerate() {
                    buf[(x2 * m + x3) * m + w] = *v;
                }
            }
        }
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        for yz in 0..m * m {
            for x1 in 0..m {
                out[x1 * m * m + yz] = buf[yz * m + x1];
            }
        }
        self.wrap = wrap;
    }

    /// Lattice coefficients (1/m³) Σ_x f(x) e^{−ik·x} of complex grid data.
    pub fn to_lattice(&mut self, f: &[Complex64], out: &mut [Complex64]) {
        let (l, m) = (self.lattice.side(), self.m);
        let wrap = std::mem::take(&mut self.wrap);
        // axis 1: lines (x2, x3)
        let buf = &mut self.buf[..];
        for x1 in 0..m {
            for yz in 0..m * m {
                buf[yz * m + x1] = f[x1 * m * m + yz];
            }
        }
        self.forward.process_with_scratch(buf, &mut self.scratch);
        // axis 2: lines (i1, x3)
        let lines = &mut self.lines;
        for i1 in 0..l {
            let w = wrap[i1];
            for x3 in 0..m {
                let dst = &mut lines[(i1 * m + x3) * m..(i1 * m + x3 + 1) * m];
                for (x2, v) in dst.iter_mut().enumerate() {
                    *v = buf[(x2 * m + x3) * m + w];
                }
            }
        }
        self.forward.process_with_scratch(lines, &mut self.scratch);
        // axis 3: lines (i1, i2)
        let buf = &mut self.buf[..l * l * m];
        for i1 in 0..l {
            for i2 in 0..l {
                let w = wrap[i2];
                for x3 in 0..m {
                    buf[(i1 * l + i2) * m + x3] = lines[(i1 * m + x3) * m + w];
                }
            }
        }
        self.forward.process_with_scratch(buf, &mut self.scratch);
        let norm = 1.0 / (m * m * m) as f64;
        for line in 0..l * l {
            for i3 in 0..l {
                out[line * l + i3] = buf[line * m + wrap[i3]] * norm;
            }
        }
        self.wrap = wrap;
    }

    /// Grid values of two real fields with Hermitian coefficients `a` and
    /// `b`, from one complex transform.
    pub fn real_pair_to_grid(
        &mut self,
        a: &[Complex64],
        b: Option<&[Complex64]>,
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        let mut packed = std::mem::take(&mut self.packed);
        let mut grid = std::mem::take(&mut self.grid);
        match b {
            Some(b) => {
                for ((p, x), y) in packed.iter_mut().zip(a).zip(b) {
                    *p = Complex64::new(x.re - y.im, x.im + y.re);
                }
            }
            None => packed.copy_from_slice(a),
        }
        self.to_grid(&packed, &mut grid);
        if b.is_some() {
            for ((z, oa), ob) in grid.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
                *oa = z.re;
                *ob = z.im;
            }
        } else {
            for (z, oa) in grid.iter().zip(out_a.iter_mut()) {
                *oa = z.re;
            }
        }
        self.packed = packed;
        self.grid = grid;
    }

    /// Lattice coefficients of two real grid fields from one complex
    /// transform.
    pub fn real_pair_to_lattice(
        &mut self,
        f: &[f64],
        g: Option<&[f64]>,
        out_f: &mut [Complex64],
        out_g: &mut [Complex64],
    ) {
        let mut grid = std::mem::take(&mut self.grid);
        let mut h = std::mem::take(&mut self.packed);
        match g {
            Some(g) => {
                for ((p, x), y) in grid.iter_mut().zip(f).zip(g) {
                    *p = Complex64::new(*x, *y);
                }
            }
            None => {
                for (p, x) in grid.iter_mut().zip(f) {
                    *p = Complex64::new(*x, 0.0);
                }
            }
        }
        self.to_lattice(&grid, &mut h);
        self.grid = grid;
        if g.is_none() {
            for (idx, o) in out_f.iter_mut().enumerate() {
                let mirror = h[self.lattice.mirror(idx)].conj();
                *o = 0.5 * (h[idx] + mirror);
            }
            self.packed = h;
            return;
        }
        // 1/(2i) = −i/2
        let minus_half_i = Complex64::new(0.0, -0.5);
        for idx in 0..h.len() {
            let mirror = h[self.lattice.mirror(idx)].conj();
            out_f[idx] = 0.5 * (h[idx] + mirror);
            out_g[idx] = (h[idx] - mirror) * minus_half_i;
        }
        self.packed = h;
    }
}
