//! Tridiagonal matrices and the Thomas algorithm.

use crate::error::{Error, Result};

/// `n × n` tridiagonal matrix. `lower[i]` sits at `(i+1, i)`, `upper[i]` at `(i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::InvalidParameter(format!(
                "inconsistent tridiagonal bands: {} / {} / {}",
                lower.len(),
                n,
                upper.len()
            )));
        }
        Ok(Tridiagonal { lower, diag, upper })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn neg(&self) -> Tridiagonal {
        Tridiagonal {
            lower: self.lower.iter().map(|v| -v).collect(),
            diag: self.diag.iter().map(|v| -v).collect(),
            upper: self.upper.iter().map(|v| -v).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.lower[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `A u = rhs` without pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            }
            if !(pivot.abs() > f64::MIN_POSITIVE) || !pivot.is_finite() {
                return Err(Error::Numeric(format!("zero pivot at row {i} in tridiagonal solve")));
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            let prev = if i > 0 { self.lower[i - 1] * d[i - 1] } else { 0.0 };
            d[i] = (rhs[i] - prev) / pivot;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}
