use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform grid of `n` interior nodes on (0, π) with homogeneous Dirichlet
/// boundary values implied at ξ = 0 and ξ = π.
///
/// The trapezoid rule with vanishing boundary values reduces to `h` times the
/// plain sum over interior nodes, so the discrete inner product is a scaled
/// Euclidean one and operator transposes are ordinary matrix transposes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n: usize,
    h: f64,
}

impl Grid1D {
    pub const MIN_NODES: usize = 8;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_NODES {
            return Err(Error::Config(format!(
                "grid.n = {n} is below the minimum of {}",
                Self::MIN_NODES
            )));
        }
        Ok(Self {
            n,
            h: PI / (n + 1) as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Interior node ξ_i, i = 0..n (ξ = (i + 1) h).
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Sample a function at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.node(i))).collect()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.n);
        self.h * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Discrete L² norm |u|₂.
    pub fn l2(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    pub fn sup(&self, u: &[f64]) -> f64 {
        u.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Centered first difference with zero boundary values.
    pub fn centered_derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { u[i - 1] };
                let right = if i + 1 == n { 0.0 } else { u[i + 1] };
                (right - left) / (2.0 * self.h)
            })
            .collect()
    }

    /// H¹₀ seminorm squared, Σ h (D₊u)² over all n + 1 cells.
    pub fn h1_seminorm_sq(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &x in u.iter().chain(std::iter::once(&0.0)) {
            let d = (x - prev) / self.h;
            acc += d * d;
            prev = x;
        }
        acc * self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_fills_interval() {
        let g = Grid1D::new(128).unwrap();
        assert!((g.spacing() * 129.0 - PI).abs() < 1e-14);
        assert!((g.node(127) + g.spacing() - PI).abs() < 1e-14);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(matches!(Grid1D::new(7), Err(Error::Config(_))));
    }

    #[test]
    fn sine_norm() {
        let g = Grid1D::new(64).unwrap();
        let s = g.sample(f64::sin);
        assert!((g.l2(&s) - (PI / 2.0).sqrt()).abs() < 1e-13);
    }
}
