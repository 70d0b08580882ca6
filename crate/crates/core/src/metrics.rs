//! Evaluation metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GaussianPosterior;
use crate::likelihood::Likelihood;
use crate::sparse::InducingSet;

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { inputs: a, targets: b });
    }
    Ok(())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    same_len(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::InvalidParameter("mse of an empty vector".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Area under the precision-recall curve with step-wise interpolation.
/// Tied scores enter the curve together as a single threshold.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    same_len(scores.len(), labels.len())?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    /// NaN for an empty bin.
    pub mean_pred: f64,
    /// NaN for an empty bin.
    pub frac_pos: f64,
    pub count: usize,
}

impl CalibrationBin {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationCurve {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn occupied(&self) -> impl Iterator<Item = &CalibrationBin> {
        self.bins.iter().filter(|b| !b.is_empty())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "mean_pred", "frac_pos", "count"])?;
        for b in &self.bins {
            w.write_record([
                b.lo.to_string(),
                b.hi.to_string(),
                b.mean_pred.to_string(),
                b.frac_pos.to_string(),
                b.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reliability curve with `bins` equal-width bins on `[0, 1]`. A prediction
/// `p` falls in bin `floor(p * bins)`, with `p = 1` in the last bin.
pub fn calibration(probs: &[f64], labels: &[bool], bins: usize) -> Result<CalibrationCurve> {
    same_len(probs.len(), labels.len())?;
    if bins == 0 {
        return Err(Error::InvalidParameter("calibration needs at least one bin".into()));
    }
    let mut sum_p = vec![0.0; bins];
    let mut pos = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for (&p, &l) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("probability out of range: {p}")));
        }
        let b = ((p * bins as f64).floor() as usize).min(bins - 1);
        sum_p[b] += p;
        pos[b] += usize::from(l);
        count[b] += 1;
    }
    let bins_out = (0..bins)
        .map(|b| {
            let c = count[b];
            let (mean_pred, frac_pos) = if c == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (sum_p[b] / c as f64, pos[b] as f64 / c as f64)
            };
            CalibrationBin {
                lo: b as f64 / bins as f64,
                hi: (b + 1) as f64 / bins as f64,
                mean_pred,
                frac_pos,
                count: c,
            }
        })
        .collect();
    Ok(CalibrationCurve { bins: bins_out })
}

/// Unweighted mean of `|frac_pos - mean_pred|` over non-empty bins.
pub fn calibration_ad(curve: &CalibrationCurve) -> Result<f64> {
    let (n, s) = curve
        .occupied()
        .fold((0usize, 0.0), |(n, s), b| (n + 1, s + (b.frac_pos - b.mean_pred).abs()));
    if n == 0 {
        return Err(Error::AllBinsEmpty);
    }
    Ok(s / n as f64)
}

/// Summed predictive log density of the test targets.
pub fn test_log_likelihood(post: &GaussianPosterior, lik: &Likelihood, truth: &[f64]) -> Result<f64> {
    same_len(post.len(), truth.len())?;
    let var = post.variance();
    truth
        .iter()
        .enumerate()
        .map(|(i, &y)| lik.predictive_log_density(y, post.mean[i], var[i]))
        .sum()
}

/// Histogram over `0..=L` of how often `c` occurs in each inducing string.
pub fn ones_histogram(z: &InducingSet, c: char) -> Result<Vec<usize>> {
    let pts = z.points();
    let len = pts.first().map_or(0, |p| p.len());
    if pts.iter().any(|p| p.len() != len) {
        return Err(Error::UnequalLengths);
    }
    let mut h = vec![0; len + 1];
    for p in pts {
        h[p.char_count(c)] += 1;
    }
    Ok(h)
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
/// NaN entries are skipped; the error is 0 for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wall-clock seconds per phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub selection: f64,
    pub fit: f64,
    pub predict: f64,
}

impl Timing {
    pub fn total(&self) -> f64 {
        self.selection + self.fit + self.predict
    }
}

/// Metrics of one fitted model on one test set. Fields that do not apply to
/// the task are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: Option<f64>,
    pub mse_rates: Option<f64>,
    pub auprc: Option<f64>,
    pub test_log_likelihood: Option<f64>,
    pub calibration_ad: Option<f64>,
    pub log_evidence: Option<f64>,
}

impl EvalReport {
    pub const FIELDS: [&'static str; 6] = [
        "mse",
        "mse_rates",
        "auprc",
        "test_log_likelihood",
        "calibration_ad",
        "log_evidence",
    ];

    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.mse,
            self.mse_rates,
            self.auprc,
            self.test_log_likelihood,
            self.calibration_ad,
            self.log_evidence,
        ]
    }

    /// Values as CSV cells; missing entries are empty.
    pub fn csv_cells(&self) -> Vec<String> {
        self.values()
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Alphabet;
    use crate::gp::PosteriorCov;
    use nalgebra::DVector;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn auprc_examples() {
        let l = [true, true, false, false];
        assert_eq!(auprc(&[0.9, 0.8, 0.2, 0.1], &l).unwrap(), 1.0);
        assert_eq!(auprc(&[0.5; 4], &[true, false, false, false]).unwrap(), 0.25);
        assert!(matches!(auprc(&[0.1], &[false]), Err(Error::NoPositives)));
    }

    #[test]
    fn calibration_examples() {
        let c = calibration(&[0.5; 4], &[true, false, true, false], 10).unwrap();
        let occ: Vec<_> = c.occupied().collect();
        assert_eq!(occ.len(), 1);
        assert_eq!((occ[0].mean_pred, occ[0].frac_pos), (0.5, 0.5));
        assert_eq!(c.total(), 4);

        let perfect = calibration(&[0.0, 1.0, 1.0, 0.0], &[false, true, true, false], 10).unwrap();
        let pts: Vec<_> = perfect.occupied().map(|b| (b.mean_pred, b.frac_pos)).collect();
        assert_eq!(pts, [(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(calibration_ad(&perfect).unwrap(), 0.0);
    }

    #[test]
    fn ad_single_bin() {
        let curve = CalibrationCurve {
            bins: vec![CalibrationBin {
                lo: 0.2,
                hi: 0.3,
                mean_pred: 0.2,
                frac_pos: 0.7,
                count: 3,
            }],
        };
        assert!((calibration_ad(&curve).unwrap() - 0.5).abs() < 1e-15);
        let empty = calibration(&[], &[], 10).unwrap();
        assert!(matches!(calibration_ad(&empty), Err(Error::AllBinsEmpty)));
    }

    #[test]
    fn log_likelihood_examples() {
        let s2 = 0.25 / std::f64::consts::PI;
        let post = GaussianPosterior {
            mean: DVector::from_vec(vec![1.0, -2.0]),
            cov: PosteriorCov::Diagonal(DVector::from_vec(vec![s2, s2])),
        };
        let lik = Likelihood::gaussian(s2).unwrap();
        assert!(test_log_likelihood(&post, &lik, &[1.0, -2.0]).unwrap().abs() < 1e-12);

        let zero = GaussianPosterior {
            mean: DVector::zeros(3),
            cov: PosteriorCov::Diagonal(DVector::zeros(3)),
        };
        let v = test_log_likelihood(&zero, &Likelihood::Bernoulli, &[1.0, 0.0, 1.0]).unwrap();
        assert!((v + 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn histogram_examples() {
        let a = Alphabet::binary();
        let z = InducingSet::new(vec![a.validate("0000000000").unwrap()], &a).unwrap();
        let h = ones_histogram(&z, '1').unwrap();
        assert_eq!(h[0], 1);
        assert_eq!(h.iter().sum::<usize>(), 1);
        let z = InducingSet::new(
            vec![a.validate("1111100000").unwrap(), a.validate("0000011111").unwrap()],
            &a,
        )
        .unwrap();
        assert_eq!(ones_histogram(&z, '1').unwrap()[5], 2);
        let bad = InducingSet::new(vec![a.validate("01").unwrap(), a.validate("011").unwrap()], &a).unwrap();
        assert!(matches!(ones_histogram(&bad, '1'), Err(Error::UnequalLengths)));
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }
}
