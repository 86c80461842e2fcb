use crate::error::{Error, Result};

/// Square tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.diag.fill(1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            lower: self.upper.clone(),
            diag: self.diag.clone(),
            upper: self.lower.clone(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Tridiagonal, beta: f64) -> Self {
        let f = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect()
        };
        Self {
            lower: f(&self.lower, &other.lower),
            diag: f(&self.diag, &other.diag),
            upper: f(&self.upper, &other.upper),
        }
    }

    /// max |M - Mᵀ| over entries.
    pub fn asymmetry(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .fold(0.0_f64, |m, (l, u)| m.max((l - u).abs()))
    }

    /// Largest absolute row sum (‖·‖∞).
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.lower[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.upper[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Upper bound on the spectral norm, sqrt(‖M‖₁ ‖M‖∞).
    pub fn norm2_bound(&self) -> f64 {
        (self.norm_inf() * self.transpose().norm_inf()).sqrt()
    }

    /// Thomas algorithm without pivoting. Fails if a pivot is not strictly
    /// positive, which for the shifted diffusion operators assembled here
    /// signals loss of positive definiteness.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot > 0.0) {
            return Err(Error::Numerical {
                step: 0,
                reason: format!("non-positive pivot {pivot} in row 0"),
            });
        }
        if n > 1 {
            c[0] = self.upper[0] / pivot;
        }
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if !(pivot > 0.0) {
                return Err(Error::Numerical {
                    step: 0,
                    reason: format!("non-positive pivot {pivot} in row {i}"),
                });
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j + 1 == i {
                self.lower[j]
            } else if i + 1 == j {
                self.upper[i]
            } else {
                0.0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tridiagonal {
        Tridiagonal {
            lower: vec![-1.0, -0.5, -1.0],
            diag: vec![4.0, 3.0, 5.0, 2.0],
            upper: vec![-1.0, -0.25, 0.5],
        }
    }

    #[test]
    fn solve_inverts_matvec() {
        let m = sample();
        let x = [1.0, -2.0, 0.5, 3.0];
        let b = m.matvec(&x);
        let y = m.solve(&b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn transpose_matches_dense() {
        let m = sample();
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }

    #[test]
    fn negative_pivot_is_reported() {
        let mut m = sample();
        m.diag[0] = -1.0;
        assert!(matches!(m.solve(&[1.0; 4]), Err(Error::Numerical { .. })));
    }
}
