//! Cholesky helpers shared by the full and sparse models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How much diagonal inflation an inducing Gram matrix receives before it is
/// factorized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    /// Jitter as a multiple of the mean diagonal.
    pub relative: f64,
    /// How often the jitter is doubled after a failed factorization.
    pub max_doublings: u32,
    /// Skip the jitter when the bare matrix factorizes with every pivot above
    /// the jitter level.
    pub adaptive: bool,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            relative: 1e-6,
            max_doublings: 8,
            adaptive: true,
        }
    }
}

impl JitterPolicy {
    /// Always add the jitter, never skip it.
    pub fn fixed(relative: f64) -> Self {
        Self {
            relative,
            adaptive: false,
            ..Self::default()
        }
    }
}

/// Lower Cholesky factor of `K + jitter * I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub lower: DMatrix<f64>,
    pub jitter: f64,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `L^{-1} b`
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        if self.dim() > 0 {
            self.lower.solve_lower_triangular_mut(&mut x);
        }
        x
    }

    /// `L^{-T} b`
    pub fn solve_upper(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        if self.dim() > 0 {
            self.lower.tr_solve_lower_triangular_mut(&mut x);
        }
        x
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        if self.dim() > 0 {
            self.lower.solve_lower_triangular_mut(&mut x);
        }
        x
    }

    pub fn solve_upper_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        if self.dim() > 0 {
            self.lower.tr_solve_lower_triangular_mut(&mut x);
        }
        x
    }

    /// `(L L^T)^{-1} b`
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper_vec(&self.solve_lower_vec(b))
    }

    /// `log |L L^T|`
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }
}

/// Plain Cholesky of a symmetric positive definite matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Factor> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    nalgebra::Cholesky::new(m.clone())
        .map(|c| Factor {
            lower: c.unpack(),
            jitter: 0.0,
        })
        .ok_or(Error::CholeskyFailure { jitter: 0.0 })
}

/// Cholesky with escalating diagonal jitter.
pub fn cholesky_jittered(m: &DMatrix<f64>, policy: &JitterPolicy) -> Result<Factor> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Factor {
            lower: DMatrix::zeros(0, 0),
            jitter: 0.0,
        });
    }
    let mean_diag = m.diagonal().sum() / n as f64;
    let base = policy.relative * mean_diag.abs().max(f64::MIN_POSITIVE);

    if policy.adaptive {
        if let Ok(f) = cholesky(m) {
            let min_pivot = f.lower.diagonal().iter().fold(f64::INFINITY, |a, &d| a.min(d * d));
            if min_pivot > base {
                return Ok(f);
            }
        }
    }

    let mut jitter = base;
    for _ in 0..=policy.max_doublings {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = nalgebra::Cholesky::new(shifted) {
            return Ok(Factor {
                lower: c.unpack(),
                jitter,
            });
        }
        jitter *= 2.0;
    }
    Err(Error::CholeskyFailure { jitter: jitter / 2.0 })
}

/// Symmetric part `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `||a - b||_F / ||b||_F`
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm();
    let diff = (a - b).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}
