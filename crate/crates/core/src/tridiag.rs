//! Tridiagonal linear systems (Thomas algorithm).

use crate::error::{Error, Result};

/// A tridiagonal matrix stored by its three diagonals.
///
/// `lower[i]` multiplies `x[i - 1]` in row `i` (so `lower[0]` is unused),
/// `upper[i]` multiplies `x[i + 1]` (so `upper[n - 1]` is unused).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Solves `self * x = rhs` without pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::Internal(format!(
                "tridiagonal solve: rhs length {} != {}",
                rhs.len(),
                n
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Internal("singular tridiagonal system at row 0".into()));
        }
        c_prime[0] = self.upper[0] / pivot;
        d_prime[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c_prime[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Internal(format!("singular tridiagonal system at row {i}")));
            }
            c_prime[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
            d_prime[i] = (rhs[i] - self.lower[i] * d_prime[i - 1]) / pivot;
        }
        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }
        Ok(x)
    }
}
