use std::path::PathBuf;

use proptest::prelude::*;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
use stringgp::data::{gen_binary_toy, gen_poisson_tf, read_splice, split, SplitSpec};
use stringgp::metrics::{auprc, calibration, calibration_ad, mse};

fn splice_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/splice.data")
}

#[test]
fn toy_ones_counts_follow_binomial() {
    let mut observed = [0usize; 11];
    for seed in 0..50 {
        let (reg, _) = gen_binary_toy(100, 10, seed).unwrap();
        for y in reg.y() {
            observed[y as usize] += 1;
        }
    }
    let total: usize = observed.iter().sum();
    let binom = Binomial::new(0.5, 10).unwrap();
    // Tails merged so every cell expects at least five strings.
    let cells: [&[u64]; 9] = [&[0, 1], &[2], &[3], &[4], &[5], &[6], &[7], &[8], &[9, 10]];
    let chi2: f64 = cells
        .iter()
        .map(|ks| {
            let o: usize = ks.iter().map(|&k| observed[k as usize]).sum();
            let e: f64 = ks.iter().map(|&k| binom.pmf(k)).sum::<f64>() * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p = ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}, counts {observed:?}");
}

#[test]
fn poisson_counts_at_seven_a_have_mean_seven() {
    let mut draws = Vec::new();
    let mut seed = 0;
    while draws.len() < 10_000 {
        let (data, rates) = gen_poisson_tf(1000, 10, 1.0, seed).unwrap();
        for (y, r) in data.y().into_iter().zip(rates) {
            if r == 7.0 && draws.len() < 10_000 {
                draws.push(y);
            }
        }
        seed += 1;
    }
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let sd = (7.0 / draws.len() as f64).sqrt();
    assert!((mean - 7.0).abs() < 3.0 * sd, "mean {mean}");
}

#[test]
fn full_splice_file_parses() {
    let uci = read_splice(&splice_path()).unwrap();
    assert_eq!(uci.dataset.len(), 3190);
    let n_ambiguous = uci
        .dataset
        .inputs()
        .iter()
        .filter(|s| s.as_str().contains(['D', 'N', 'S', 'R']))
        .count();
    assert!(uci.dataset.inputs().iter().any(|s| s.as_str().contains('D')));
    assert!(n_ambiguous > 0);
    for (class, y) in uci.classes.iter().zip(uci.dataset.y()) {
        assert_eq!(y == 1.0, class == "EI" || class == "IE");
    }
    assert!(uci.dataset.inputs().iter().all(|s| s.len() == 60));
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn permuted<T: Clone>(v: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&i| v[i].clone()).collect()
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<usize>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..16).prop_map(|k| k as f64 / 16.0), n),
            prop::collection::vec(any::<bool>(), n),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #[test]
    fn split_partitions_are_disjoint_and_exhaustive(n in 2usize..300, folds in 2usize..12, seed in any::<u64>()) {
        prop_assume!(folds <= n);
        let parts = split(n, &SplitSpec::kfold(folds, seed)).unwrap();
        let sizes: Vec<usize> = parts.iter().map(|p| p.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = parts.iter().flat_map(|p| p.test.iter().copied()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for p in &parts {
            let mut both: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
            both.sort_unstable();
            prop_assert_eq!(both, (0..n).collect::<Vec<_>>());
        }
        let f = split(n, &SplitSpec::fraction(0.6, seed)).unwrap();
        prop_assert_eq!(f[0].train.len() + f[0].test.len(), n);
    }

    #[test]
    fn auprc_ignores_monotone_transforms((scores, labels, _) in scored_labels()) {
        prop_assume!(labels.iter().any(|&l| l));
        let base = auprc(&scores, &labels).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s - 7.0).collect();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        prop_assert!(rel_eq(base, auprc(&affine, &labels).unwrap()));
        prop_assert!(rel_eq(base, auprc(&exp, &labels).unwrap()));
    }

    #[test]
    fn metrics_ignore_joint_permutation((scores, labels, perm) in scored_labels()) {
        let ps = permuted(&scores, &perm);
        let pl = permuted(&labels, &perm);
        let truth: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        prop_assert!(rel_eq(mse(&scores, &truth).unwrap(), mse(&ps, &permuted(&truth, &perm)).unwrap()));
        if labels.iter().any(|&l| l) {
            prop_assert!(rel_eq(auprc(&scores, &labels).unwrap(), auprc(&ps, &pl).unwrap()));
        }
        let a = calibration_ad(&calibration(&scores, &labels, 10).unwrap()).unwrap();
        let b = calibration_ad(&calibration(&ps, &pl, 10).unwrap()).unwrap();
        prop_assert!(rel_eq(a, b));
    }

    #[test]
    fn perfectly_calibrated_bins_have_zero_deviation(reps in prop::collection::vec(1usize..6, 5)) {
        // Each group predicts `f` and has exactly a fraction `f` of positives.
        let fracs = [0.25, 0.25, 0.5, 0.75, 1.0];
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for (&r, &f) in reps.iter().zip(&fracs) {
            let n = 4 * r;
            let pos = (f * n as f64) as usize;
            for i in 0..n {
                probs.push(f);
                labels.push(i < pos);
            }
        }
        let ad = calibration_ad(&calibration(&probs, &labels, 10).unwrap()).unwrap();
        prop_assert!(ad.abs() < 1e-15);
    }
}
