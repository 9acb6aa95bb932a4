//! Dense eigendecomposition of the graph Laplacian and the random-walk
//! semigroup S_t = e^{t𝓛}.

use faer::{Mat, Side};

use super::Grid;
use crate::error::{Error, Result};
use crate::manifold::neumaier_sum;

pub const DEFAULT_DENSE_CAP: usize = 3000;

/// 𝓛 = Q diag(μ) Qᵀ with μ sorted in descending order (μ₁ ≈ 0).
#[derive(Debug, Clone)]
pub struct SpectralLaplacian {
    n: usize,
    eigenvalues: Vec<f64>,
    /// Row-major n×n; column k is the k-th eigenvector.
    eigenvectors: Vec<f64>,
}

impl SpectralLaplacian {
    pub fn new(grid: &Grid, cap: usize) -> Result<Self> {
        let n = grid.n();
        if n > cap {
            return Err(Error::DenseCap { n, cap });
        }
        let dense = grid.laplacian_dense();
        let a = Mat::<f64>::from_fn(n, n, |i, j| dense[i * n + j]);
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        // faer returns ascending order
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors = vec![0.0; n * n];
        for k in 0..n {
            let src = n - 1 - k;
            eigenvalues.push(s[src]);
            for i in 0..n {
                eigenvectors[i * n + k] = u[(i, src)];
            }
        }
        Ok(SpectralLaplacian {
            n,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// μ₁ ≥ μ₂ ≥ … ≥ μ_N.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.eigenvectors[i * self.n + k]).collect()
    }

    /// Qᵀ f
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let n = self.n;
        let mut c = vec![0.0; n];
        for (i, &fi) in f.iter().enumerate() {
            let row = &self.eigenvectors[i * n..(i + 1) * n];
            for (ck, &q) in c.iter_mut().zip(row) {
                *ck += q * fi;
            }
        }
        Ok(c)
    }

    /// Q c
    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c.len())?;
        let n = self.n;
        Ok((0..n)
            .map(|i| {
                let row = &self.eigenvectors[i * n..(i + 1) * n];
                row.iter().zip(c).map(|(q, c)| q * c).sum()
            })
            .collect())
    }

    /// e^{t𝓛} f. Eigenvalues are clamped at 0 so roundoff above zero cannot
    /// grow at large t.
    pub fn semigroup_apply(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::NegativeTime(t));
        }
        let mut c = self.coefficients(f)?;
        for (ck, mu) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= (mu.min(0.0) * t).exp();
        }
        self.synthesize(&c)
    }

    /// Σ_i f_i (S_t g)_i, computed in the eigenbasis.
    pub fn semigroup_bilinear(&self, f: &[f64], g: &[f64], t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::NegativeTime(t));
        }
        let cf = self.coefficients(f)?;
        let cg = self.coefficients(g)?;
        Ok(neumaier_sum(
            cf.iter()
                .zip(&cg)
                .zip(&self.eigenvalues)
                .map(|((a, b), mu)| a * b * (mu.min(0.0) * t).exp()),
        ))
    }

    /// max |A − Q diag(μ) Qᵀ| entrywise against a row-major dense matrix.
    pub fn reconstruction_error(&self, dense: &[f64]) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            let qi = &self.eigenvectors[i * n..(i + 1) * n];
            for j in 0..n {
                let qj = &self.eigenvectors[j * n..(j + 1) * n];
                let v: f64 = (0..n).map(|k| qi[k] * self.eigenvalues[k] * qj[k]).sum();
                worst = worst.max((v - dense[i * n + j]).abs());
            }
        }
        worst
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: len,
            });
        }
        Ok(())
    }
}
