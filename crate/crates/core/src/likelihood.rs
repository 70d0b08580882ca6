use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::quadrature::{gaussian_expectation, gaussian_log_expectation};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Observation model `p(y | f)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Likelihood {
    Gaussian { noise_variance: f64 },
    /// Logistic link.
    Bernoulli,
    /// Log link.
    Poisson,
}

/// `log p(y|f)` with its first two derivatives in `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikTerms {
    pub log_p: f64,
    pub d1: f64,
    pub d2: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Likelihood {
    pub fn gaussian(noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Likelihood::Gaussian { noise_variance })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Likelihood::Gaussian { .. } => "gaussian",
            Likelihood::Bernoulli => "bernoulli",
            Likelihood::Poisson => "poisson",
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Likelihood::Gaussian { .. })
    }

    pub fn check_target(&self, y: f64) -> Result<()> {
        let ok = y.is_finite()
            && match self {
                Likelihood::Gaussian { .. } => true,
                Likelihood::Bernoulli => y == 0.0 || y == 1.0,
                Likelihood::Poisson => y >= 0.0 && y.fract() == 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedTarget {
                likelihood: self.name(),
                value: y,
            })
        }
    }

    pub fn check_targets(&self, ys: &[f64]) -> Result<()> {
        ys.iter().try_for_each(|&y| self.check_target(y))
    }

    pub fn terms(&self, y: f64, f: f64) -> Result<LikTerms> {
        self.check_target(y)?;
        Ok(self.terms_unchecked(y, f))
    }

    pub(crate) fn terms_unchecked(&self, y: f64, f: f64) -> LikTerms {
        match *self {
            Likelihood::Gaussian { noise_variance: s2 } => {
                let r = y - f;
                LikTerms {
                    log_p: -0.5 * r * r / s2 - 0.5 * (LN_2PI + s2.ln()),
                    d1: r / s2,
                    d2: -1.0 / s2,
                }
            }
            Likelihood::Bernoulli => {
                let p = sigmoid(f);
                let log_p = if y > 0.5 { -softplus(-f) } else { -softplus(f) };
                LikTerms {
                    log_p,
                    d1: y - p,
                    d2: -p * (1.0 - p),
                }
            }
            Likelihood::Poisson => {
                let rate = f.exp();
                LikTerms {
                    log_p: y * f - rate - ln_factorial(y as u64),
                    d1: y - rate,
                    d2: -rate,
                }
            }
        }
    }

    /// `log p(y*)` under a Gaussian predictive `f* ~ N(mean, var)`.
    pub fn predictive_log_density(&self, y: f64, mean: f64, var: f64) -> Result<f64> {
        self.check_target(y)?;
        let var = var.max(0.0);
        Ok(match *self {
            Likelihood::Gaussian { noise_variance } => {
                let v = var + noise_variance;
                -0.5 * (y - mean).powi(2) / v - 0.5 * (LN_2PI + v.ln())
            }
            Likelihood::Bernoulli => {
                let p = class_probability_scalar(mean, var);
                if y > 0.5 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            Likelihood::Poisson => {
                gaussian_log_expectation(mean, var, |f| self.terms_unchecked(y, f).log_p)
            }
        })
    }
}

/// `(log p(y|f), d/df, d^2/df^2)`
pub fn likelihood_terms(lik: &Likelihood, y: f64, f: f64) -> Result<(f64, f64, f64)> {
    let t = lik.terms(y, f)?;
    Ok((t.log_p, t.d1, t.d2))
}

/// `E[sigmoid(f)]` for `f ~ N(mean, var)`.
pub fn class_probability_scalar(mean: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return sigmoid(mean);
    }
    let p = gaussian_expectation(mean, var, sigmoid);
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `E[exp(f)] = exp(mean + var / 2)`, the Poisson rate under a log-normal latent.
pub fn expected_rate(mean: f64, var: f64) -> f64 {
    (mean + 0.5 * var.max(0.0)).exp()
}
