//! Grid search over the noise variance and spectrum order by log evidence.

use nalgebra::DVector;

use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::gp::{laplace_newton, NewtonOptions};
use crate::kernel::{KernelConfig, SpectrumKernel};
use crate::likelihood::Likelihood;
use crate::sparse::{dtc_gaussian, DtcBasis};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(Error::InvalidParameter(format!("bad grid [{lo}, {hi}] x {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Ten points spanning `[1e-4, 1e1]`.
pub fn default_noise_grid() -> Vec<f64> {
    log_grid(1e-4, 1e1, 10).expect("static grid")
}

pub fn default_order_grid() -> Vec<usize> {
    vec![1, 2, 3, 4, 5]
}

/// Best point of a grid search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridChoice {
    pub order: usize,
    pub noise_variance: Option<f64>,
    pub log_evidence: f64,
}

/// Full-GP Gaussian evidence for every noise value on the grid, from a
/// single eigendecomposition of the Gram matrix.
pub fn noise_profile_full(data: &Dataset, kcfg: &KernelConfig, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("noise grid values must be positive".into()));
    }
    let n = data.len();
    let kernel = SpectrumKernel::new(*kcfg);
    let k = kernel.gram_symmetric(data.inputs()).into_matrix();
    let eig = k.symmetric_eigen();
    let proj = eig.eigenvectors.tr_mul(&DVector::from_vec(data.y()));
    Ok(grid
        .iter()
        .map(|&s2| {
            let mut quad = 0.0;
            let mut log_det = 0.0;
            for (lam, p) in eig.eigenvalues.iter().zip(proj.iter()) {
                let d = lam.max(0.0) + s2;
                quad += p * p / d;
                log_det += d.ln();
            }
            -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * LN_2PI
        })
        .collect())
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Picks the spectrum order and, for a Gaussian likelihood, the noise
/// variance that maximize the full-GP log evidence. Non-Gaussian likelihoods
/// use the Laplace evidence and ignore `noise_grid`.
pub fn select_full(
    data: &Dataset,
    orders: &[usize],
    normalized: bool,
    lik: &Likelihood,
    noise_grid: &[f64],
) -> Result<GridChoice> {
    if orders.is_empty() || (lik.is_gaussian() && noise_grid.is_empty()) {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    let mut best: Option<GridChoice> = None;
    for &order in orders {
        let kcfg = KernelConfig::new(order)?.with_normalization(normalized);
        let cand = if lik.is_gaussian() {
            let prof = noise_profile_full(data, &kcfg, noise_grid)?;
            let Some(i) = argmax(&prof) else { continue };
            GridChoice {
                order,
                noise_variance: Some(noise_grid[i]),
                log_evidence: prof[i],
            }
        } else {
            let k = SpectrumKernel::new(kcfg).gram_symmetric(data.inputs()).into_matrix();
            let fit = laplace_newton(&k, &data.y(), lik, &NewtonOptions::default())?;
            GridChoice {
                order,
                noise_variance: None,
                log_evidence: fit.state.log_evidence,
            }
        };
        if cand.log_evidence.is_finite() && best.is_none_or(|b| cand.log_evidence > b.log_evidence) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no grid point gave a finite evidence".into()))
}

/// Noise variance maximizing the DTC evidence for a fixed inducing basis.
pub fn select_noise_sparse(basis: &DtcBasis, y: &[f64], grid: &[f64]) -> Result<(f64, f64)> {
    let values = grid
        .iter()
        .map(|&s2| dtc_gaussian(basis, y, s2).map(|g| g.log_evidence))
        .collect::<Result<Vec<_>>>()?;
    let i = argmax(&values).ok_or_else(|| Error::InvalidParameter("empty noise grid".into()))?;
    Ok((grid[i], values[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Alphabet, Targets};
    use crate::gp::fit_full_gaussian;

    #[test]
    fn grid_endpoints() {
        let g = default_noise_grid();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert!((g[9] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn profile_matches_cholesky_evidence() {
        let a = Alphabet::binary();
        let xs = ["0101101", "1110001", "0000111", "1010101", "0110110"];
        let inputs = xs.iter().map(|s| a.validate(s).unwrap()).collect();
        let d = Dataset::new(a, inputs, Targets::Real(vec![0.5, 1.0, -0.2, 2.0, 0.3])).unwrap();
        let cfg = KernelConfig::new(2).unwrap();
        let grid = default_noise_grid();
        let prof = noise_profile_full(&d, &cfg, &grid).unwrap();
        for (s2, v) in grid.iter().zip(&prof) {
            let direct = fit_full_gaussian(&d, &cfg, *s2).unwrap().log_evidence();
            assert!((v - direct).abs() < 1e-8 * direct.abs().max(1.0), "{s2}: {v} vs {direct}");
        }
        let choice = select_full(&d, &[2], false, &Likelihood::gaussian(1.0).unwrap(), &grid).unwrap();
        let imax = argmax(&prof).unwrap();
        assert_eq!(choice.noise_variance, Some(grid[imax]));
    }
}
