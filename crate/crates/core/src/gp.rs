//! Exact GP regression and Laplace-approximate inference for full
//! (non-sparse) models.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Sequence};
use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, SpectrumKernel};
use crate::likelihood::{class_probability_scalar, Likelihood};
use crate::linalg::{cholesky, Factor};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const PREDICT_CHUNK: usize = 256;

/// Predictive distribution over latent values at test inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: PosteriorCov,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PosteriorCov {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl GaussianPosterior {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn variance(&self) -> DVector<f64> {
        match &self.cov {
            PosteriorCov::Full(c) => c.diagonal(),
            PosteriorCov::Diagonal(d) => d.clone(),
        }
    }

    /// Concatenates diagonal posteriors computed on consecutive test chunks.
    fn concat(parts: Vec<GaussianPosterior>) -> GaussianPosterior {
        let mean: Vec<f64> = parts.iter().flat_map(|p| p.mean.iter().copied()).collect();
        let var: Vec<f64> = parts.iter().flat_map(|p| p.variance().iter().copied().collect::<Vec<_>>()).collect();
        GaussianPosterior {
            mean: DVector::from_vec(mean),
            cov: PosteriorCov::Diagonal(DVector::from_vec(var)),
        }
    }
}

/// `p(y* = 1)` by Gauss-Hermite integration of the logistic function.
pub fn class_probability(post: &GaussianPosterior) -> Vec<f64> {
    let var = post.variance();
    post.mean
        .iter()
        .zip(var.iter())
        .map(|(&m, &v)| class_probability_scalar(m, v.max(0.0)))
        .collect()
}

/// Mode of the latent posterior under a non-Gaussian likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceState {
    pub f_hat: DVector<f64>,
    /// Negative second derivative of `log p(y|f)` at the mode.
    pub w: DVector<f64>,
    pub log_evidence: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the objective gradient at the returned point.
    pub grad_norm: f64,
    /// Unnormalized log posterior after each accepted step, starting at the
    /// initial point.
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            max_halvings: 20,
        }
    }
}

/// Laplace fit on an explicit prior covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub state: LaplaceState,
    /// `d log p(y|f) / df` at the mode.
    pub dlogp: DVector<f64>,
    pub sqrt_w: DVector<f64>,
    /// Cholesky of `I + W^{1/2} K W^{1/2}`.
    pub b_factor: Factor,
}

fn log_lik_sum(lik: &Likelihood, y: &[f64], f: &DVector<f64>) -> f64 {
    y.iter()
        .zip(f.iter())
        .map(|(&yi, &fi)| lik.terms_unchecked(yi, fi).log_p)
        .sum()
}

fn b_matrix(k: &DMatrix<f64>, sw: &DVector<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            b[(i, j)] = sw[i] * k[(i, j)] * sw[j];
        }
        b[(j, j)] += 1.0;
    }
    b
}

/// Damped Newton iterations for the mode of `log p(y|f) - f^T K^{-1} f / 2`,
/// parametrized by `f = K a` so `K` is never inverted.
pub fn laplace_newton(
    k: &DMatrix<f64>,
    y: &[f64],
    lik: &Likelihood,
    opts: &NewtonOptions,
) -> Result<LaplaceFit> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::NotSquare {
            rows: k.nrows(),
            cols: k.ncols(),
        });
    }
    lik.check_targets(y)?;

    let mut a = DVector::zeros(n);
    let mut f = DVector::zeros(n);
    let mut psi = log_lik_sum(lik, y, &f);
    let mut trace = vec![psi];
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm;

    loop {
        let terms: Vec<_> = y.iter().zip(f.iter()).map(|(&yi, &fi)| lik.terms_unchecked(yi, fi)).collect();
        let d1 = DVector::from_iterator(n, terms.iter().map(|t| t.d1));
        let w = DVector::from_iterator(n, terms.iter().map(|t| (-t.d2).max(0.0)));
        grad_norm = (&d1 - &a).amax();
        // One more Newton step after the test passes: the error of the mode
        // is then limited by rounding rather than by the tolerance.
        if grad_norm < opts.tol {
            if converged {
                break;
            }
            converged = true;
        } else {
            converged = false;
        }
        if iterations >= opts.max_iter && !converged {
            break;
        }
        iterations += 1;

        let sw = w.map(f64::sqrt);
        let lb = cholesky(&b_matrix(k, &sw))?;
        let b = w.component_mul(&f) + &d1;
        let c = lb.solve_lower_vec(&sw.component_mul(&(k * &b)));
        let a_new = &b - sw.component_mul(&lb.solve_upper_vec(&c));
        let da = a_new - &a;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let a_try = &a + step * &da;
            let f_try = k * &a_try;
            let psi_try = log_lik_sum(lik, y, &f_try) - 0.5 * a_try.dot(&f_try);
            if psi_try.is_finite() && psi_try >= psi {
                a = a_try;
                f = f_try;
                psi = psi_try;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(psi);
    }

    let terms: Vec<_> = y.iter().zip(f.iter()).map(|(&yi, &fi)| lik.terms_unchecked(yi, fi)).collect();
    let dlogp = DVector::from_iterator(n, terms.iter().map(|t| t.d1));
    let w = DVector::from_iterator(n, terms.iter().map(|t| (-t.d2).max(0.0)));
    let sqrt_w = w.map(f64::sqrt);
    let b_factor = cholesky(&b_matrix(k, &sqrt_w))?;
    let log_evidence = psi - 0.5 * b_factor.log_det();
    if !converged {
        log::debug!("Laplace mode search stopped after {iterations} iterations, |grad| = {grad_norm:e}");
    }
    Ok(LaplaceFit {
        state: LaplaceState {
            f_hat: f,
            w,
            log_evidence,
            iterations,
            converged,
            grad_norm,
            objective_trace: trace,
        },
        dlogp,
        sqrt_w,
        b_factor,
    })
}

/// Exact Gaussian evidence `log N(y; 0, K + s2 I)` for a precomputed Gram.
pub fn gaussian_log_evidence(k: &DMatrix<f64>, y: &[f64], noise_variance: f64) -> Result<f64> {
    let (factor, alpha) = gaussian_factor(k, y, noise_variance)?;
    Ok(gaussian_log_evidence_from(&factor, &alpha, y))
}

fn gaussian_factor(k: &DMatrix<f64>, y: &[f64], s2: f64) -> Result<(Factor, DVector<f64>)> {
    let mut ks = k.clone();
    for i in 0..ks.nrows() {
        ks[(i, i)] += s2;
    }
    let factor = cholesky(&ks)?;
    let alpha = factor.solve_vec(&DVector::from_column_slice(y));
    Ok((factor, alpha))
}

fn gaussian_log_evidence_from(factor: &Factor, alpha: &DVector<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let fit = DVector::from_column_slice(y).dot(alpha);
    -0.5 * fit - 0.5 * factor.log_det() - 0.5 * n * LN_2PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FullState {
    Gaussian {
        /// Cholesky of `K + s2 I`.
        chol: Factor,
        alpha: DVector<f64>,
    },
    Laplace(LaplaceFit),
}

/// Fitted full GP.
#[derive(Debug)]
pub struct FullGpModel {
    train: Dataset,
    kernel: SpectrumKernel,
    likelihood: Likelihood,
    state: FullState,
}

impl FullGpModel {
    /// Dispatches on the likelihood: exact for Gaussian, Laplace otherwise.
    pub fn fit(data: &Dataset, kcfg: &KernelConfig, lik: Likelihood) -> Result<Self> {
        match lik {
            Likelihood::Gaussian { noise_variance } => fit_full_gaussian(data, kcfg, noise_variance),
            _ => laplace_fit_full(data, kcfg, lik),
        }
    }

    pub(crate) fn from_parts(
        train: Dataset,
        kcfg: KernelConfig,
        likelihood: Likelihood,
        state: FullState,
    ) -> Self {
        Self {
            train,
            kernel: SpectrumKernel::new(kcfg),
            likelihood,
            state,
        }
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn kernel_config(&self) -> &KernelConfig {
        self.kernel.config()
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.likelihood
    }

    pub fn state(&self) -> &FullState {
        &self.state
    }

    pub fn laplace(&self) -> Option<&LaplaceState> {
        match &self.state {
            FullState::Laplace(fit) => Some(&fit.state),
            FullState::Gaussian { .. } => None,
        }
    }

    /// `(K + s2 I)^{-1} y` for Gaussian models.
    pub fn alpha(&self) -> Option<&DVector<f64>> {
        match &self.state {
            FullState::Gaussian { alpha, .. } => Some(alpha),
            FullState::Laplace(_) => None,
        }
    }

    pub fn cholesky(&self) -> Option<&Factor> {
        match &self.state {
            FullState::Gaussian { chol, .. } => Some(chol),
            FullState::Laplace(_) => None,
        }
    }

    /// Log marginal likelihood (exact or Laplace-approximate).
    pub fn log_evidence(&self) -> f64 {
        match &self.state {
            FullState::Gaussian { chol, alpha } => {
                gaussian_log_evidence_from(chol, alpha, &self.train.y())
            }
            FullState::Laplace(fit) => fit.state.log_evidence,
        }
    }

    /// Latent predictive at `test`.
    pub fn predict(&self, test: &[Sequence], full_cov: bool) -> GaussianPosterior {
        if full_cov || test.len() <= PREDICT_CHUNK {
            return self.predict_block(test, full_cov);
        }
        let parts: Vec<_> = test
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| self.predict_block(chunk, false))
            .collect();
        GaussianPosterior::concat(parts)
    }

    fn predict_block(&self, test: &[Sequence], full_cov: bool) -> GaussianPosterior {
        let kxs = self.kernel.gram(self.train.inputs(), test).into_matrix();
        let (mean, v) = match &self.state {
            FullState::Gaussian { chol, alpha } => (kxs.tr_mul(alpha), chol.solve_lower(&kxs)),
            FullState::Laplace(fit) => {
                let mut scaled = kxs.clone();
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= fit.sqrt_w[i];
                }
                (kxs.tr_mul(&fit.dlogp), fit.b_factor.solve_lower(&scaled))
            }
        };
        let cov = if full_cov {
            let kss = self.kernel.gram_symmetric(test).into_matrix();
            PosteriorCov::Full(kss - v.tr_mul(&v))
        } else {
            let prior = self.kernel.diag(test);
            let var = DVector::from_iterator(
                test.len(),
                prior.iter().enumerate().map(|(j, p)| p - v.column(j).norm_squared()),
            );
            PosteriorCov::Diagonal(var)
        };
        GaussianPosterior { mean, cov }
    }
}

/// Exact GP with Gaussian noise of variance `noise_variance`.
pub fn fit_full_gaussian(data: &Dataset, kcfg: &KernelConfig, noise_variance: f64) -> Result<FullGpModel> {
    let lik = Likelihood::gaussian(noise_variance)?;
    let kernel = SpectrumKernel::new(*kcfg);
    let k = kernel.gram_symmetric(data.inputs()).into_matrix();
    let (chol, alpha) = gaussian_factor(&k, &data.y(), noise_variance)?;
    Ok(FullGpModel {
        train: data.clone(),
        kernel,
        likelihood: lik,
        state: FullState::Gaussian { chol, alpha },
    })
}

/// Latent predictive of a Gaussian-likelihood model.
pub fn predict_full(model: &FullGpModel, test: &[Sequence], full_cov: bool) -> GaussianPosterior {
    model.predict(test, full_cov)
}

/// Latent predictive of a Laplace-fitted model.
pub fn predict_latent_full(model: &FullGpModel, test: &[Sequence]) -> GaussianPosterior {
    model.predict(test, false)
}

/// `log N(y; 0, K + s2 I)` of a Gaussian-likelihood model.
pub fn log_marginal_gaussian(model: &FullGpModel) -> Result<f64> {
    match model.state {
        FullState::Gaussian { .. } => Ok(model.log_evidence()),
        FullState::Laplace(_) => Err(Error::InvalidParameter(
            "log_marginal_gaussian needs a Gaussian likelihood".into(),
        )),
    }
}

/// Laplace approximation for Bernoulli or Poisson likelihoods.
pub fn laplace_fit_full(data: &Dataset, kcfg: &KernelConfig, lik: Likelihood) -> Result<FullGpModel> {
    if lik.is_gaussian() {
        return Err(Error::InvalidParameter(
            "Laplace fitting is for non-Gaussian likelihoods".into(),
        ));
    }
    let kernel = SpectrumKernel::new(*kcfg);
    let k = kernel.gram_symmetric(data.inputs()).into_matrix();
    let fit = laplace_newton(&k, &data.y(), &lik, &NewtonOptions::default())?;
    Ok(FullGpModel {
        train: data.clone(),
        kernel,
        likelihood: lik,
        state: FullState::Laplace(fit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Alphabet, Targets};

    fn dataset(xs: &[&str], ys: &[f64]) -> Dataset {
        let a = Alphabet::dna();
        Dataset::new(
            a.clone(),
            xs.iter().map(|s| a.validate(s).unwrap()).collect(),
            Targets::Real(ys.to_vec()),
        )
        .unwrap()
    }

    fn k2() -> KernelConfig {
        KernelConfig::new(2).unwrap()
    }

    #[test]
    fn scalar_alpha() {
        let d = dataset(&["ACGTA"], &[1.7]);
        let c = crate::kernel::gram(d.inputs(), d.inputs(), &k2()).get(0, 0);
        let m = fit_full_gaussian(&d, &k2(), 0.3).unwrap();
        assert!((m.alpha().unwrap()[0] - 1.7 / (c + 0.3)).abs() < 1e-14);
        let expected = -0.5 * 1.7f64.powi(2) / (c + 0.3) - 0.5 * (2.0 * std::f64::consts::PI * (c + 0.3)).ln();
        assert!((log_marginal_gaussian(&m).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let d = dataset(&["ACGT", "ACGA"], &[1.0, -0.5]);
        let g = crate::kernel::gram(d.inputs(), d.inputs(), &k2());
        let s2 = 0.2;
        let (a, b, c) = (g.get(0, 0) + s2, g.get(0, 1), g.get(1, 1) + s2);
        let det = a * c - b * b;
        let inv = [[c / det, -b / det], [-b / det, a / det]];
        let y = [1.0, -0.5];
        let alpha = [inv[0][0] * y[0] + inv[0][1] * y[1], inv[1][0] * y[0] + inv[1][1] * y[1]];
        let m = fit_full_gaussian(&d, &k2(), s2).unwrap();
        for i in 0..2 {
            assert!((m.alpha().unwrap()[i] - alpha[i]).abs() < 1e-12);
        }
        let quad = y[0] * alpha[0] + y[1] * alpha[1];
        let dense = -0.5 * quad - 0.5 * det.ln() - LN_2PI;
        assert!((log_marginal_gaussian(&m).unwrap() - dense).abs() < 1e-12);
        let chol = m.cholesky().unwrap();
        let target = g.as_matrix() + DMatrix::identity(2, 2) * s2;
        assert!(crate::linalg::relative_frobenius(&chol.reconstruct(), &target) < 1e-8);
    }

    #[test]
    fn empty_training_set_gives_prior() {
        let d = dataset(&[], &[]);
        let m = fit_full_gaussian(&d, &k2(), 0.1).unwrap();
        let test = vec![Alphabet::dna().validate("ACGTT").unwrap(), Alphabet::dna().validate("AAC").unwrap()];
        let post = m.predict(&test, true);
        assert_eq!(post.mean, DVector::zeros(2));
        let prior = crate::kernel::gram(&test, &test, &k2()).into_matrix();
        match post.cov {
            PosteriorCov::Full(c) => assert_eq!(c, prior),
            _ => unreachable!(),
        }
    }

    #[test]
    fn interpolates_single_point() {
        let d = dataset(&["ACGTAC"], &[2.5]);
        let m = fit_full_gaussian(&d, &k2(), 1e-10).unwrap();
        let post = m.predict(d.inputs(), false);
        let kxx = crate::kernel::gram(d.inputs(), d.inputs(), &k2()).get(0, 0);
        assert!((post.mean[0] - 2.5).abs() < 1e-6);
        assert!(post.variance()[0] <= 1e-6 * kxx);
    }

    #[test]
    fn gaussian_likelihood_rejected_by_laplace() {
        let d = dataset(&["AC"], &[1.0]);
        assert!(laplace_fit_full(&d, &k2(), Likelihood::gaussian(1.0).unwrap()).is_err());
    }

    #[test]
    fn laplace_poisson_diagonal_prior_matches_bisection() {
        // K = c I and y = 1: each coordinate solves 1 - e^f = f / c
        let c = 3.0;
        let n = 4;
        let k = DMatrix::identity(n, n) * c;
        let y = vec![1.0; n];
        let fit = laplace_newton(&k, &y, &Likelihood::Poisson, &NewtonOptions::default()).unwrap();
        assert!(fit.state.converged);
        let g = |f: f64| 1.0 - f.exp() - f / c;
        let (mut lo, mut hi) = (-5.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        for i in 0..n {
            assert!((fit.state.f_hat[i] - 0.5 * (lo + hi)).abs() < 1e-8);
        }
    }

    #[test]
    fn laplace_bernoulli_balanced_symmetric() {
        let n = 6;
        let k = DMatrix::from_element(n, n, 2.0) + DMatrix::identity(n, n) * 1e-3;
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let fit = laplace_newton(&k, &y, &Likelihood::Bernoulli, &NewtonOptions::default()).unwrap();
        // the shared component cancels; only the small diagonal part separates labels
        let mean: f64 = fit.state.f_hat.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-8);
        assert!(fit.state.f_hat.amax() < 1e-2);
    }

    #[test]
    fn laplace_objective_monotone_and_bounded() {
        let n = 8;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = 10.0 * (-((i as f64 - j as f64).powi(2)) / 4.0).exp();
            }
        }
        let y = vec![0.0, 3.0, 7.0, 12.0, 5.0, 0.0, 1.0, 20.0];
        let fit = laplace_newton(&k, &y, &Likelihood::Poisson, &NewtonOptions::default()).unwrap();
        assert!(fit.state.converged);
        assert!(fit.state.grad_norm < 1e-6);
        for w in fit.state.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let loglik = log_lik_sum(&Likelihood::Poisson, &y, &fit.state.f_hat);
        assert!(fit.state.log_evidence <= loglik);
        assert!(fit.state.w.iter().all(|&w| w >= 0.0));
    }
}
