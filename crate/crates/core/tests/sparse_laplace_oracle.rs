//! Sparse Laplace fits checked against a dense Newton solve carried out
//! directly in the space of inducing outputs `u`, with explicit inverses.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stringgp::{
    Alphabet, Dataset, InducingSet, KernelConfig, Likelihood, Sequence, SparseGpModel, SparseOptions, Targets,
};

fn random_strings(rng: &mut ChaCha8Rng, alphabet: &Alphabet, n: usize, len: usize) -> Vec<Sequence> {
    let symbols: Vec<char> = alphabet.symbols().collect();
    (0..n)
        .map(|_| {
            let s: String = (0..len).map(|_| symbols[rng.random_range(0..symbols.len())]).collect();
            alphabet.validate(&s).unwrap()
        })
        .collect()
}

fn dense_gram(a: &[Sequence], b: &[Sequence], cfg: &KernelConfig) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| stringgp::kernel::kernel_naive(&a[i], &b[j], cfg))
}

struct Oracle {
    u_hat: DVector<f64>,
    sigma_u: DMatrix<f64>,
    log_evidence: f64,
}

/// Newton on `sum log p(y | A u) - u^T Kzz^{-1} u / 2`, with `A = Kxz Kzz^{-1}`.
fn u_space_laplace(kzz: &DMatrix<f64>, kxz: &DMatrix<f64>, y: &[f64], lik: &Likelihood) -> Oracle {
    let m = kzz.nrows();
    let kinv = kzz.clone().try_inverse().unwrap();
    let a = kxz * &kinv;
    let terms = |f: &DVector<f64>| -> Vec<(f64, f64, f64)> {
        y.iter()
            .zip(f.iter())
            .map(|(&yi, &fi)| stringgp::likelihood::likelihood_terms(lik, yi, fi).unwrap())
            .collect()
    };
    let psi = |u: &DVector<f64>| -> f64 {
        let f = &a * u;
        terms(&f).iter().map(|t| t.0).sum::<f64>() - 0.5 * u.dot(&(&kinv * u))
    };
    let mut u = DVector::zeros(m);
    for _ in 0..200 {
        let f = &a * &u;
        let t = terms(&f);
        let d1 = DVector::from_iterator(t.len(), t.iter().map(|t| t.1));
        let w = DVector::from_iterator(t.len(), t.iter().map(|t| -t.2));
        let grad = a.tr_mul(&d1) - &kinv * &u;
        let hess = a.transpose() * DMatrix::from_diagonal(&w) * &a + &kinv;
        let step = hess.clone().try_inverse().unwrap() * &grad;
        let mut s = 1.0;
        let base = psi(&u);
        while psi(&(&u + &step * s)) < base && s > 1e-8 {
            s *= 0.5;
        }
        u += step * s;
        if grad.amax() < 1e-12 {
            break;
        }
    }
    let f = &a * &u;
    let t = terms(&f);
    let w = DVector::from_iterator(t.len(), t.iter().map(|t| -t.2));
    let hess = a.transpose() * DMatrix::from_diagonal(&w) * &a + &kinv;
    let log_lik: f64 = t.iter().map(|t| t.0).sum();
    let log_det = (DMatrix::identity(m, m) + kzz * (a.transpose() * DMatrix::from_diagonal(&w) * &a))
        .determinant()
        .ln();
    Oracle {
        log_evidence: log_lik - 0.5 * u.dot(&(&kinv * &u)) - 0.5 * log_det,
        sigma_u: hess.try_inverse().unwrap(),
        u_hat: u,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn check_case(lik: Likelihood, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = Alphabet::new("AT".chars()).unwrap();
    let cfg = KernelConfig::new(2).unwrap();
    let (n, m) = (20, 3);
    let x = random_strings(&mut rng, &alphabet, n, 8);
    let targets = match lik {
        Likelihood::Bernoulli => Targets::Binary(x.iter().map(|s| s.char_count('A') > 4).collect()),
        _ => Targets::Counts(x.iter().map(|s| s.char_count('A') as u64 / 2).collect()),
    };
    let data = Dataset::new(alphabet.clone(), x.clone(), targets).unwrap();
    let z = loop {
        let z = random_strings(&mut rng, &alphabet, m, 8);
        let kzz = dense_gram(&z, &z, &cfg);
        if kzz.symmetric_eigenvalues().min() > 1e-3 * kzz.trace() / m as f64 {
            break z;
        }
    };
    let kzz = dense_gram(&z, &z, &cfg);
    let kxz = dense_gram(&x, &z, &cfg);
    let oracle = u_space_laplace(&kzz, &kxz, &data.y(), &lik);

    let set = InducingSet::new(z.clone(), &alphabet).unwrap();
    let model = SparseGpModel::fit(&data, &set, &cfg, lik, &SparseOptions::default()).unwrap();
    assert!(rel(model.log_evidence(), oracle.log_evidence) < 1e-6, "{} vs {}", model.log_evidence(), oracle.log_evidence);
    assert!((model.mu_u() - &oracle.u_hat).amax() < 1e-5 * oracle.u_hat.amax().max(1.0));
    assert!((model.a_cov() - &oracle.sigma_u).amax() < 1e-5 * oracle.sigma_u.amax());

    let test = random_strings(&mut rng, &alphabet, 6, 8);
    let post = model.predict(&test, false);
    let var = post.variance();
    let kinv = kzz.clone().try_inverse().unwrap();
    let ksz = dense_gram(&test, &z, &cfg);
    for j in 0..test.len() {
        let a = ksz.row(j) * &kinv;
        let mean = (&a * &oracle.u_hat)[0];
        let kss = stringgp::kernel::kernel_naive(&test[j], &test[j], &cfg);
        let v = kss - (&a * ksz.row(j).transpose())[0] + (&a * &oracle.sigma_u * a.transpose())[0];
        assert!((post.mean[j] - mean).abs() < 1e-6 * mean.abs().max(1.0));
        assert!((var[j] - v).abs() < 1e-6 * v.abs().max(1.0));
    }
}

#[test]
fn bernoulli_matches_u_space_newton() {
    for seed in 0..5 {
        check_case(Likelihood::Bernoulli, seed);
    }
}

#[test]
fn poisson_matches_u_space_newton() {
    for seed in 0..5 {
        check_case(Likelihood::Poisson, 100 + seed);
    }
}
