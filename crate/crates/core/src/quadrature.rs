//! Gauss-Hermite quadrature for expectations under a univariate Gaussian.

use std::sync::OnceLock;

use nalgebra::DMatrix;

pub const GH_POINTS: usize = 32;

/// Nodes and weights for `int exp(-x^2) g(x) dx`, via the eigen-decomposition
/// of the Jacobi matrix of the Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn table() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| gauss_hermite(GH_POINTS))
}

/// `E[g(f)]` for `f ~ N(mean, var)`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(mean: f64, var: f64, g: F) -> f64 {
    if var <= 0.0 {
        return g(mean);
    }
    let (nodes, weights) = table();
    let scale = (2.0 * var).sqrt();
    let norm = std::f64::consts::PI.sqrt();
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * g(mean + scale * x))
        .sum::<f64>()
        / norm
}

/// `log E[exp(h(f))]` for `f ~ N(mean, var)`, evaluated with log-sum-exp.
pub fn gaussian_log_expectation<F: Fn(f64) -> f64>(mean: f64, var: f64, log_h: F) -> f64 {
    if var <= 0.0 {
        return log_h(mean);
    }
    let (nodes, weights) = table();
    let scale = (2.0 * var).sqrt();
    let terms: Vec<f64> = nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w.ln() + log_h(mean + scale * x))
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln() - 0.5 * std::f64::consts::PI.ln()
}
