//! Sparse GP under the deterministic training conditional (DTC).
//!
//! Training latents are tied to the inducing outputs through
//! `f = K_xz K_zz^{-1} u`, so `cov(f) = Q_nn = K_xz K_zz^{-1} K_zx`. Everything
//! is computed in whitened coordinates `u = L v` with `L L^T = K_zz`, which
//! turns `Q_nn` into `V^T V` with `V = L^{-1} K_zx` (m x n). No n x n matrix is
//! ever formed.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Alphabet, Dataset, Sequence};
use crate::error::{Error, Result};
use crate::gp::{GaussianPosterior, LaplaceState, NewtonOptions, PosteriorCov};
use crate::kernel::{KernelConfig, SpectrumKernel};
use crate::likelihood::Likelihood;
use crate::linalg::{cholesky, cholesky_jittered, Factor, JitterPolicy};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
// kernel columns kept by an objective, counted in f64 entries
const COLUMN_CACHE_ENTRIES: usize = 4_000_000;

/// The inducing inputs `z_1..z_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducingSet {
    points: Vec<Sequence>,
}

impl InducingSet {
    pub fn new(points: Vec<Sequence>, alphabet: &Alphabet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("inducing set must not be empty".into()));
        }
        for p in &points {
            alphabet.validate(p.as_str())?;
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Sequence] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Drops repeated points, keeping the first occurrence.
    pub fn dedup(&self) -> Self {
        Self {
            points: dedup_points(&self.points),
        }
    }
}

pub(crate) fn dedup_points(points: &[Sequence]) -> Vec<Sequence> {
    let mut seen = std::collections::HashSet::new();
    points.iter().filter(|p| seen.insert((*p).clone())).cloned().collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseOptions {
    pub jitter: JitterPolicy,
    pub dedup: bool,
    pub newton: NewtonOptions,
}

impl Default for SparseOptions {
    fn default() -> Self {
        Self {
            jitter: JitterPolicy::default(),
            dedup: true,
            newton: NewtonOptions::default(),
        }
    }
}

/// Whitened projection `V = L^{-1} K_zx`.
#[derive(Clone, Debug)]
pub struct DtcBasis {
    pub kzz: Factor,
    pub v: DMatrix<f64>,
}

impl DtcBasis {
    pub fn new(kzz: &DMatrix<f64>, kzx: &DMatrix<f64>, policy: &JitterPolicy) -> Result<Self> {
        let factor = cholesky_jittered(kzz, policy)?;
        let v = factor.solve_lower(kzx);
        Ok(Self { kzz: factor, v })
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    pub fn n(&self) -> usize {
        self.v.ncols()
    }

    /// `I + V diag(w) V^T`
    fn precision(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= w[j].sqrt();
        }
        let mut p = &scaled * scaled.transpose();
        for i in 0..p.nrows() {
            p[(i, i)] += 1.0;
        }
        p
    }
}

/// Gaussian posterior over whitened inducing outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtcGaussian {
    /// Cholesky of `B = I + V V^T / s2`.
    pub b_factor: Factor,
    pub mean_v: DVector<f64>,
    pub log_evidence: f64,
}

/// `log N(y; 0, V^T V + s2 I)` plus the whitened posterior, in O(n m^2).
pub fn dtc_gaussian(basis: &DtcBasis, y: &[f64], noise_variance: f64) -> Result<DtcGaussian> {
    let s2 = noise_variance;
    if !(s2 > 0.0) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let b = basis.precision(&DVector::from_element(n, 1.0 / s2));
    let b_factor = cholesky(&b)?;
    let r = (&basis.v * &yv) / s2;
    let c = b_factor.solve_lower_vec(&r);
    let quad = yv.norm_squared() / s2 - c.norm_squared();
    let log_det = n as f64 * s2.ln() + b_factor.log_det();
    let log_evidence = -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;
    let mean_v = b_factor.solve_upper_vec(&c);
    Ok(DtcGaussian {
        b_factor,
        mean_v,
        log_evidence,
    })
}

/// Laplace fit over whitened inducing outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtcLaplace {
    /// Whitened mode.
    pub a_hat: DVector<f64>,
    /// Cholesky of `H = I + V W V^T`.
    pub h_factor: Factor,
    /// Mode in `u` space; `w` holds the curvature at the implied training latents.
    pub state: LaplaceState,
}

fn psi(lik: &Likelihood, y: &[f64], f: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let ll: f64 = y
        .iter()
        .zip(f.iter())
        .map(|(&yi, &fi)| lik.terms_unchecked(yi, fi).log_p)
        .sum();
    ll - 0.5 * a.norm_squared()
}

/// Newton iterations for the mode of `log p(y | V^T a) - |a|^2 / 2`.
/// Each iteration costs O(n m^2 + m^3).
pub fn dtc_laplace(basis: &DtcBasis, y: &[f64], lik: &Likelihood, opts: &NewtonOptions) -> Result<DtcLaplace> {
    lik.check_targets(y)?;
    let (m, n) = (basis.m(), basis.n());
    if n != y.len() {
        return Err(Error::LengthMismatch {
            inputs: n,
            targets: y.len(),
        });
    }
    let mut a = DVector::zeros(m);
    let mut f = DVector::zeros(n);
    let mut obj = psi(lik, y, &f, &a);
    let mut trace = vec![obj];
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm;

    let derivs = |f: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let terms: Vec<_> = y.iter().zip(f.iter()).map(|(&yi, &fi)| lik.terms_unchecked(yi, fi)).collect();
        (
            DVector::from_iterator(n, terms.iter().map(|t| t.d1)),
            DVector::from_iterator(n, terms.iter().map(|t| (-t.d2).max(0.0))),
        )
    };

    loop {
        let (d1, w) = derivs(&f);
        let g = &basis.v * &d1 - &a;
        grad_norm = if m == 0 { 0.0 } else { g.amax() };
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
        let h = cholesky(&basis.precision(&w))?;
        let da = h.solve_vec(&g);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let a_try = &a + step * &da;
            let f_try = basis.v.tr_mul(&a_try);
            let obj_try = psi(lik, y, &f_try, &a_try);
            if obj_try.is_finite() && obj_try >= obj {
                a = a_try;
                f = f_try;
                obj = obj_try;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(obj);
    }

    let (_, w) = derivs(&f);
    let h_factor = cholesky(&basis.precision(&w))?;
    let log_evidence = obj - 0.5 * h_factor.log_det();
    let u_hat = if m == 0 { DVector::zeros(0) } else { &basis.kzz.lower * &a };
    Ok(DtcLaplace {
        a_hat: a,
        h_factor,
        state: LaplaceState {
            f_hat: u_hat,
            w,
            log_evidence,
            iterations,
            converged,
            grad_norm,
            objective_trace: trace,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SparseState {
    Gaussian(DtcGaussian),
    Laplace(DtcLaplace),
}

/// Fitted sparse GP.
#[derive(Debug)]
pub struct SparseGpModel {
    inducing: InducingSet,
    kernel: SpectrumKernel,
    likelihood: Likelihood,
    kzz: Factor,
    state: SparseState,
}

impl SparseGpModel {
    pub fn fit(
        data: &Dataset,
        z: &InducingSet,
        kcfg: &KernelConfig,
        lik: Likelihood,
        opts: &SparseOptions,
    ) -> Result<Self> {
        let z = if opts.dedup { z.dedup() } else { z.clone() };
        let kernel = SpectrumKernel::new(*kcfg);
        let basis = build_basis(&kernel, data.inputs(), z.points(), &opts.jitter)?;
        let y = data.y();
        let state = match lik {
            Likelihood::Gaussian { noise_variance } => SparseState::Gaussian(dtc_gaussian(&basis, &y, noise_variance)?),
            _ => SparseState::Laplace(dtc_laplace(&basis, &y, &lik, &opts.newton)?),
        };
        Ok(Self {
            inducing: z,
            kernel,
            likelihood: lik,
            kzz: basis.kzz,
            state,
        })
    }

    pub(crate) fn from_parts(
        inducing: InducingSet,
        kcfg: KernelConfig,
        likelihood: Likelihood,
        kzz: Factor,
        state: SparseState,
    ) -> Self {
        Self {
            inducing,
            kernel: SpectrumKernel::new(kcfg),
            likelihood,
            kzz,
            state,
        }
    }

    pub fn inducing(&self) -> &InducingSet {
        &self.inducing
    }

    pub fn kernel_config(&self) -> &KernelConfig {
        self.kernel.config()
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.likelihood
    }

    /// Jittered Cholesky factor of `K_zz`.
    pub fn kzz_factor(&self) -> &Factor {
        &self.kzz
    }

    pub fn state(&self) -> &SparseState {
        &self.state
    }

    pub fn laplace(&self) -> Option<&LaplaceState> {
        match &self.state {
            SparseState::Laplace(l) => Some(&l.state),
            SparseState::Gaussian(_) => None,
        }
    }

    pub fn log_evidence(&self) -> f64 {
        match &self.state {
            SparseState::Gaussian(g) => g.log_evidence,
            SparseState::Laplace(l) => l.state.log_evidence,
        }
    }

    fn whitened(&self) -> (&DVector<f64>, &Factor) {
        match &self.state {
            SparseState::Gaussian(g) => (&g.mean_v, &g.b_factor),
            SparseState::Laplace(l) => (&l.a_hat, &l.h_factor),
        }
    }

    /// Posterior mean of the inducing outputs `u`.
    pub fn mu_u(&self) -> DVector<f64> {
        &self.kzz.lower * self.whitened().0
    }

    /// Posterior covariance of `u`, `A = L P^{-1} L^T`.
    pub fn a_cov(&self) -> DMatrix<f64> {
        let (_, p) = self.whitened();
        let lt = self.kzz.lower.transpose();
        let x = p.solve_lower(&lt);
        let mut a = x.tr_mul(&x);
        crate::linalg::symmetrize(&mut a);
        a
    }

    pub fn predict(&self, test: &[Sequence], full_cov: bool) -> GaussianPosterior {
        let (mean_v, p) = self.whitened();
        let kzs = self.kernel.gram(self.inducing.points(), test).into_matrix();
        let vs = self.kzz.solve_lower(&kzs);
        let ws = p.solve_lower(&vs);
        let mean = vs.tr_mul(mean_v);
        let cov = if full_cov {
            let kss = self.kernel.gram_symmetric(test).into_matrix();
            PosteriorCov::Full(kss - vs.tr_mul(&vs) + ws.tr_mul(&ws))
        } else {
            let prior = self.kernel.diag(test);
            PosteriorCov::Diagonal(DVector::from_iterator(
                test.len(),
                prior
                    .iter()
                    .enumerate()
                    .map(|(j, k)| k - vs.column(j).norm_squared() + ws.column(j).norm_squared()),
            ))
        };
        GaussianPosterior { mean, cov }
    }
}

fn build_basis(
    kernel: &SpectrumKernel,
    x: &[Sequence],
    z: &[Sequence],
    policy: &JitterPolicy,
) -> Result<DtcBasis> {
    let kzz = kernel.gram_symmetric(z).into_matrix();
    let kzx = kernel.gram(z, x).into_matrix();
    DtcBasis::new(&kzz, &kzx, policy)
}

/// DTC evidence `log N(y; 0, Q_nn + s2 I)`.
pub fn sparse_evidence_gaussian(
    data: &Dataset,
    z: &InducingSet,
    kcfg: &KernelConfig,
    noise_variance: f64,
) -> Result<f64> {
    let z = z.dedup();
    let kernel = SpectrumKernel::new(*kcfg);
    let basis = build_basis(&kernel, data.inputs(), z.points(), &JitterPolicy::default())?;
    Ok(dtc_gaussian(&basis, &data.y(), noise_variance)?.log_evidence)
}

pub fn fit_sparse_gaussian(
    data: &Dataset,
    z: &InducingSet,
    kcfg: &KernelConfig,
    noise_variance: f64,
) -> Result<SparseGpModel> {
    SparseGpModel::fit(
        data,
        z,
        kcfg,
        Likelihood::gaussian(noise_variance)?,
        &SparseOptions::default(),
    )
}

pub fn sparse_predict(model: &SparseGpModel, test: &[Sequence], full_cov: bool) -> GaussianPosterior {
    model.predict(test, full_cov)
}

/// Laplace approximation in the inducing space for Bernoulli or Poisson data.
pub fn sparse_laplace_fit(
    data: &Dataset,
    z: &InducingSet,
    kcfg: &KernelConfig,
    lik: Likelihood,
) -> Result<SparseGpModel> {
    if lik.is_gaussian() {
        return Err(Error::InvalidParameter(
            "Laplace fitting is for non-Gaussian likelihoods".into(),
        ));
    }
    SparseGpModel::fit(data, z, kcfg, lik, &SparseOptions::default())
}

pub fn sparse_predict_latent(model: &SparseGpModel, test: &[Sequence]) -> GaussianPosterior {
    model.predict(test, false)
}

/// Sparse log evidence of a candidate inducing set, with kernel columns
/// against the training inputs memoized per inducing string.
#[derive(Debug)]
pub struct EvidenceObjective {
    inputs: Vec<Sequence>,
    y: Vec<f64>,
    kernel: SpectrumKernel,
    likelihood: Likelihood,
    opts: SparseOptions,
    columns: RwLock<HashMap<Sequence, Arc<Vec<f64>>>>,
}

impl EvidenceObjective {
    pub fn new(data: &Dataset, kcfg: &KernelConfig, lik: Likelihood, opts: SparseOptions) -> Result<Self> {
        let y = data.y();
        lik.check_targets(&y)?;
        Ok(Self {
            inputs: data.inputs().to_vec(),
            y,
            kernel: SpectrumKernel::new(*kcfg),
            likelihood: lik,
            opts,
            columns: RwLock::new(HashMap::new()),
        })
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.likelihood
    }

    /// Same data and kernel with a different likelihood; the caches are reused.
    pub fn set_likelihood(&mut self, lik: Likelihood) -> Result<()> {
        lik.check_targets(&self.y)?;
        self.likelihood = lik;
        Ok(())
    }

    fn column(&self, z: &Sequence) -> Arc<Vec<f64>> {
        if let Some(c) = self.columns.read().expect("column cache").get(z) {
            return Arc::clone(c);
        }
        let col = Arc::new(self.kernel.column(z, &self.inputs));
        let mut map = self.columns.write().expect("column cache");
        if (map.len() + 1) * self.inputs.len().max(1) > COLUMN_CACHE_ENTRIES {
            map.clear();
        }
        map.entry(z.clone()).or_insert(col).clone()
    }

    /// Whitened basis for `z` (deduplicated first when configured).
    pub fn basis(&self, z: &[Sequence]) -> Result<DtcBasis> {
        let owned;
        let z = if self.opts.dedup {
            owned = dedup_points(z);
            &owned[..]
        } else {
            z
        };
        let m = z.len();
        let n = self.inputs.len();
        let kzz = self.kernel.gram_symmetric(z).into_matrix();
        let mut kzx = DMatrix::zeros(m, n);
        for (i, zi) in z.iter().enumerate() {
            let col = self.column(zi);
            for (j, v) in col.iter().enumerate() {
                kzx[(i, j)] = *v;
            }
        }
        DtcBasis::new(&kzz, &kzx, &self.opts.jitter)
    }

    pub fn evidence(&self, z: &[Sequence]) -> Result<f64> {
        let basis = self.basis(z)?;
        self.evidence_with(&basis, &self.likelihood)
    }

    pub fn evidence_with(&self, basis: &DtcBasis, lik: &Likelihood) -> Result<f64> {
        match *lik {
            Likelihood::Gaussian { noise_variance } => Ok(dtc_gaussian(basis, &self.y, noise_variance)?.log_evidence),
            _ => Ok(dtc_laplace(basis, &self.y, lik, &self.opts.newton)?.state.log_evidence),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Targets;
    use crate::gp::fit_full_gaussian;

    fn dna(xs: &[&str]) -> Vec<Sequence> {
        xs.iter().map(|s| Alphabet::dna().validate(s).unwrap()).collect()
    }

    fn data(xs: &[&str], y: &[f64]) -> Dataset {
        Dataset::new(Alphabet::dna(), dna(xs), Targets::Real(y.to_vec())).unwrap()
    }

    #[test]
    fn inducing_set_rules() {
        assert!(InducingSet::new(vec![], &Alphabet::dna()).is_err());
        let bad = vec![Alphabet::binary().validate("01").unwrap()];
        assert!(InducingSet::new(bad, &Alphabet::dna()).is_err());
        let z = InducingSet::new(dna(&["AC", "GT", "AC"]), &Alphabet::dna()).unwrap();
        assert_eq!(z.dedup().len(), 2);
    }

    #[test]
    fn far_test_point_reverts_to_prior() {
        let d = data(&["AAAAAA", "AAAACA"], &[1.0, 2.0]);
        let z = InducingSet::new(dna(&["AAAAAA"]), &Alphabet::dna()).unwrap();
        let m = fit_sparse_gaussian(&d, &z, &KernelConfig::new(3).unwrap(), 0.1).unwrap();
        let test = dna(&["GTGTGT"]);
        let post = m.predict(&test, false);
        assert_eq!(post.mean[0], 0.0);
        let prior = SpectrumKernel::new(KernelConfig::new(3).unwrap()).diag(&test)[0];
        assert_eq!(post.variance()[0], prior);
    }

    #[test]
    fn interpolation_limit() {
        let xs = ["ACGTTGCA", "TTGACCAG", "GGCATAGC"];
        let d = data(&xs, &[1.0, -2.0, 0.5]);
        let z = InducingSet::new(d.inputs().to_vec(), &Alphabet::dna()).unwrap();
        let m = fit_sparse_gaussian(&d, &z, &KernelConfig::new(3).unwrap(), 1e-10).unwrap();
        let mu = m.mu_u();
        for (i, y) in [1.0, -2.0, 0.5].iter().enumerate() {
            assert!((mu[i] - y).abs() < 1e-4, "{} vs {y}", mu[i]);
        }
        let a = m.a_cov();
        let tr = a.trace();
        assert!(a.symmetric_eigen().eigenvalues.min() >= -1e-8 * tr / 3.0);
    }

    #[test]
    fn single_inducing_point_matches_dense_q() {
        let xs = ["ACGTAC", "ACGGAC", "TTTACG", "CGCGCG", "ACACAC"];
        let y = [0.3, 1.2, -0.7, 2.0, 0.1];
        let d = data(&xs, &y);
        let cfg = KernelConfig::new(2).unwrap();
        let z = InducingSet::new(dna(&["ACGTAA"]), &Alphabet::dna()).unwrap();
        let s2 = 0.4;
        let got = sparse_evidence_gaussian(&d, &z, &cfg, s2).unwrap();

        let kern = SpectrumKernel::new(cfg);
        let kzz = kern.eval(&z.points()[0], &z.points()[0]);
        let kx: Vec<f64> = d.inputs().iter().map(|x| kern.eval(x, &z.points()[0])).collect();
        let n = xs.len();
        let cov = DMatrix::from_fn(n, n, |i, j| kx[i] * kx[j] / kzz + if i == j { s2 } else { 0.0 });
        let inv = cov.clone().try_inverse().unwrap();
        let yv = DVector::from_column_slice(&y);
        let dense = -0.5 * yv.dot(&(&inv * &yv)) - 0.5 * cov.determinant().ln() - 0.5 * n as f64 * LN_2PI;
        assert!((got - dense).abs() < 1e-10, "{got} vs {dense}");
    }

    #[test]
    fn identity_case_matches_full_evidence() {
        let xs = ["ACGTTGCAAT", "TTGACCAGGA", "GGCATAGCTT", "CATCATGGAC"];
        let y = [1.0, -0.3, 0.8, 2.2];
        let d = data(&xs, &y);
        let cfg = KernelConfig::new(4).unwrap();
        let z = InducingSet::new(d.inputs().to_vec(), &Alphabet::dna()).unwrap();
        let sparse = sparse_evidence_gaussian(&d, &z, &cfg, 0.2).unwrap();
        let full = fit_full_gaussian(&d, &cfg, 0.2).unwrap().log_evidence();
        assert!((sparse - full).abs() < 1e-8);
    }

    #[test]
    fn objective_matches_direct_evaluation() {
        let xs = ["ACGTTG", "TTGACC", "GGCATA", "CATCAT"];
        let d = data(&xs, &[1.0, -0.3, 0.8, 2.2]);
        let cfg = KernelConfig::new(2).unwrap();
        let obj = EvidenceObjective::new(&d, &cfg, Likelihood::gaussian(0.5).unwrap(), SparseOptions::default()).unwrap();
        let z = dna(&["ACGTTG", "CCCATA"]);
        let direct = sparse_evidence_gaussian(&d, &InducingSet::new(z.clone(), &Alphabet::dna()).unwrap(), &cfg, 0.5).unwrap();
        assert_eq!(obj.evidence(&z).unwrap(), direct);
        // duplicates are dropped before evaluation
        let dup = vec![z[0].clone(), z[1].clone(), z[0].clone()];
        assert_eq!(obj.evidence(&dup).unwrap(), direct);
    }
}
