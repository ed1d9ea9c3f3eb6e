//! Small dense symmetric matrices for Fisher information work.
//!
//! Input models here have a handful of parameters, so this stays deliberately
//! tiny: symmetric storage, block-diagonal assembly, and a Cholesky factor
//! used both as a positive-definiteness certificate and to sample from
//! N(theta, F^-1 / k) without forming the inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    // Row-major dim x dim; constructors keep it symmetric.
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn block_diag(blocks: &[SymMatrix]) -> Self {
        let dim = blocks.iter().map(|b| b.dim).sum();
        let mut m = Self::zeros(dim);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.dim {
                for j in 0..b.dim {
                    m.data[(off + i) * dim + (off + j)] = b.get(i, j);
                }
            }
            off += b.dim;
        }
        m
    }

    /// Rescale as D * M * D for diagonal D; how Fisher matrices transport
    /// between parametrizations at a stationary point.
    pub fn diag_sandwich(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim);
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i * self.dim + j] *= d[i] * d[j];
            }
        }
        out
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        let n = self.dim;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {s} at index {i}"
                        )));
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { dim: n, lower: l })
    }
}

#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    // Lower-triangular factor L with M = L L^T, row-major.
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// Solve L^T y = x in place. For z ~ N(0, I), the solution has
    /// covariance (L L^T)^-1 = M^-1, which is exactly the inverse-Fisher
    /// sampling the asymptotic bootstrap needs.
    pub fn solve_transpose_in_place(&self, x: &mut [f64]) {
        let n = self.dim;
        assert_eq!(x.len(), n);
        for i in (0..n).rev() {
            let mut s = x[i];
            for (k, &xk) in x.iter().enumerate().skip(i + 1) {
                s -= self.lower[k * n + i] * xk;
            }
            x[i] = s / self.lower[i * n + i];
        }
    }
}
