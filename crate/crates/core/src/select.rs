//! Inducing-point selection: random, greedy, greedy over random candidate
//! subsets, and simulated annealing over the string domain.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{perturb, Dataset, Sequence};
use crate::error::{Error, Result};
use crate::sparse::{dedup_points, EvidenceObjective, InducingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Greedy,
    GreedySubset,
    Sa,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Greedy => "greedy",
            Method::GreedySubset => "greedy_subset",
            Method::Sa => "sa",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub method: Method,
    /// Number of inducing points.
    pub m: usize,
    /// Candidates scored per greedy-subset round.
    pub subset_size: usize,
    pub sa_iterations: usize,
    pub t0: f64,
    pub decay: f64,
    /// Characters changed per annealing proposal.
    pub n_chars: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: Method::Random,
            m: 5,
            subset_size: 20,
            sa_iterations: 2000,
            t0: 1.0,
            decay: 0.999,
            n_chars: 1,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.into()));
        if self.m < 1 {
            return bad("m must be at least 1");
        }
        if self.subset_size < 1 {
            return bad("subset_size must be at least 1");
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad("t0 must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if self.n_chars < 1 {
            return bad("n_chars must be at least 1");
        }
        Ok(())
    }
}

/// A black-box score of a candidate inducing set; larger is better.
pub trait Objective: Sync {
    fn evaluate(&self, z: &[Sequence]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[Sequence]) -> Result<f64> + Sync,
{
    fn evaluate(&self, z: &[Sequence]) -> Result<f64> {
        self(z)
    }
}

impl Objective for EvidenceObjective {
    fn evaluate(&self, z: &[Sequence]) -> Result<f64> {
        self.evidence(z)
    }
}

fn distinct_inputs(data: &Dataset) -> Vec<Sequence> {
    dedup_points(data.inputs())
}

fn sample_distinct<R: Rng + ?Sized>(data: &Dataset, m: usize, rng: &mut R) -> Result<Vec<Sequence>> {
    let pool = distinct_inputs(data);
    if m > pool.len() || m == 0 {
        return Err(Error::TooFewPoints {
            requested: m,
            available: pool.len(),
        });
    }
    Ok(index::sample(rng, pool.len(), m)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

/// `m` distinct training inputs drawn uniformly without replacement.
pub fn select_random(data: &Dataset, cfg: &SelectionConfig) -> Result<InducingSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = sample_distinct(data, cfg.m, &mut rng)?;
    InducingSet::new(pts, data.alphabet())
}

/// `min(1, exp(E / T))`
pub fn acceptance_probability(e: f64, t: f64) -> f64 {
    if e >= 0.0 {
        1.0
    } else {
        (e / t).exp()
    }
}

/// `T0 * decay^t`
pub fn temperature(t: usize, cfg: &SelectionConfig) -> f64 {
    cfg.t0 * cfg.decay.powf(t as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealRecord {
    pub t: usize,
    pub temperature: f64,
    /// Objective change of the proposal; `-inf` when its evaluation failed.
    pub energy: f64,
    /// Objective of the proposal, NaN when its evaluation failed.
    pub objective: f64,
    pub accepted: bool,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub records: Vec<AnnealRecord>,
    pub initial: Vec<Sequence>,
    pub initial_objective: f64,
    pub final_set: Vec<Sequence>,
    pub best_set: Vec<Sequence>,
    pub best_objective: f64,
}

impl AnnealTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "T", "E", "objective", "accepted", "best_so_far"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.temperature.to_string(),
                r.energy.to_string(),
                r.objective.to_string(),
                u8::from(r.accepted).to_string(),
                r.best_so_far.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulated annealing from a random subset of the training inputs. Each
/// step perturbs one uniformly chosen inducing string; the best set ever
/// visited is returned.
pub fn select_sa<O: Objective + ?Sized>(
    data: &Dataset,
    cfg: &SelectionConfig,
    objective: &O,
) -> Result<(InducingSet, AnnealTrace)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = sample_distinct(data, cfg.m, &mut rng)?;
    let initial_objective = objective.evaluate(&initial)?;
    if !initial_objective.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "objective is not finite on the initial set: {initial_objective}"
        )));
    }
    let mut current = initial.clone();
    let mut current_obj = initial_objective;
    let mut best = initial.clone();
    let mut best_obj = initial_objective;
    let mut records = Vec::with_capacity(cfg.sa_iterations);

    for t in 0..cfg.sa_iterations {
        let temp = temperature(t, cfg);
        let i = rng.random_range(0..current.len());
        let mut proposal = current.clone();
        proposal[i] = perturb(&current[i], data.alphabet(), cfg.n_chars, &mut rng)?;
        let u: f64 = rng.random();
        let (obj, energy) = match objective.evaluate(&proposal) {
            Ok(v) if v.is_finite() => (v, v - current_obj),
            Ok(v) => {
                log::warn!("annealing step {t}: non-finite objective {v}, proposal rejected");
                (f64::NAN, f64::NEG_INFINITY)
            }
            Err(e) => {
                log::warn!("annealing step {t}: objective failed ({e}), proposal rejected");
                (f64::NAN, f64::NEG_INFINITY)
            }
        };
        let accepted = u < acceptance_probability(energy, temp);
        if accepted {
            current = proposal;
            current_obj = obj;
            if obj > best_obj {
                best_obj = obj;
                best = current.clone();
            }
        }
        records.push(AnnealRecord {
            t,
            temperature: temp,
            energy,
            objective: obj,
            accepted,
            best_so_far: best_obj,
        });
    }

    let set = InducingSet::new(best.clone(), data.alphabet())?;
    Ok((
        set,
        AnnealTrace {
            records,
            initial,
            initial_objective,
            final_set: current,
            best_set: best,
            best_objective: best_obj,
        },
    ))
}

/// Result of a greedy run: chosen training indices in selection order and
/// the objective after each round.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyOutcome {
    pub set: InducingSet,
    pub indices: Vec<usize>,
    pub round_objectives: Vec<f64>,
}

/// Index of the largest value; ties go to the earliest position and NaN
/// never wins.
fn deterministic_argmax(scored: &[(usize, f64)]) -> Option<(usize, f64)> {
    scored
        .par_iter()
        .filter(|(_, v)| !v.is_nan())
        .map(|&(i, v)| (i, v))
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
}

fn greedy_impl<O: Objective + ?Sized>(
    data: &Dataset,
    cfg: &SelectionConfig,
    objective: &O,
    subset: Option<usize>,
) -> Result<GreedyOutcome> {
    cfg.validate()?;
    let n = data.len();
    if cfg.m > n {
        return Err(Error::TooFewPoints {
            requested: cfg.m,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chosen = vec![false; n];
    let mut indices = Vec::with_capacity(cfg.m);
    let mut z: Vec<Sequence> = Vec::with_capacity(cfg.m);
    let mut round_objectives = Vec::with_capacity(cfg.m);

    for _ in 0..cfg.m {
        let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
        let candidates = match subset {
            Some(s) if s < remaining.len() => {
                let mut pick: Vec<usize> = index::sample(&mut rng, remaining.len(), s)
                    .into_iter()
                    .map(|j| remaining[j])
                    .collect();
                pick.sort_unstable();
                pick
            }
            _ => remaining,
        };
        let scores: Vec<Result<(usize, f64)>> = candidates
            .par_iter()
            .map(|&i| {
                let mut trial = z.clone();
                trial.push(data.inputs()[i].clone());
                objective.evaluate(&trial).map(|v| (i, v))
            })
            .collect();
        let scored = scores.into_iter().collect::<Result<Vec<_>>>()?;
        let (best, value) = deterministic_argmax(&scored)
            .ok_or_else(|| Error::InvalidParameter("every greedy candidate scored NaN".into()))?;
        chosen[best] = true;
        indices.push(best);
        z.push(data.inputs()[best].clone());
        round_objectives.push(value);
    }
    Ok(GreedyOutcome {
        set: InducingSet::new(z, data.alphabet())?,
        indices,
        round_objectives,
    })
}

/// Adds, `m` times, the training input whose inclusion scores highest.
pub fn select_greedy<O: Objective + ?Sized>(
    data: &Dataset,
    cfg: &SelectionConfig,
    objective: &O,
) -> Result<GreedyOutcome> {
    greedy_impl(data, cfg, objective, None)
}

/// Greedy selection where each round scores only `subset_size` fresh
/// candidates drawn from the inputs not yet chosen.
pub fn select_greedy_subset<O: Objective + ?Sized>(
    data: &Dataset,
    cfg: &SelectionConfig,
    objective: &O,
) -> Result<GreedyOutcome> {
    greedy_impl(data, cfg, objective, Some(cfg.subset_size))
}

/// Selected set and diagnostics for any method.
#[derive(Clone, Debug)]
pub struct Selection {
    pub set: InducingSet,
    pub objective: Option<f64>,
    pub trace: Option<AnnealTrace>,
}

/// Dispatches on `cfg.method`. The objective of the returned set is reported
/// for every method.
pub fn select<O: Objective + ?Sized>(data: &Dataset, cfg: &SelectionConfig, objective: &O) -> Result<Selection> {
    cfg.validate()?;
    Ok(match cfg.method {
        Method::Random => {
            let set = select_random(data, cfg)?;
            let value = objective.evaluate(set.points()).ok();
            Selection {
                set,
                objective: value,
                trace: None,
            }
        }
        Method::Greedy | Method::GreedySubset => {
            let out = if cfg.method == Method::Greedy {
                select_greedy(data, cfg, objective)?
            } else {
                select_greedy_subset(data, cfg, objective)?
            };
            Selection {
                set: out.set,
                objective: out.round_objectives.last().copied(),
                trace: None,
            }
        }
        Method::Sa => {
            let (set, trace) = select_sa(data, cfg, objective)?;
            Selection {
                set,
                objective: Some(trace.best_objective),
                trace: Some(trace),
            }
        }
    })
}
