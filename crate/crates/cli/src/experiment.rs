//! One experiment = `repeats` independent runs of
//! data -> split -> hyperparameters -> selection -> fit -> predict -> metrics.

use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stringgp::data::{self, split, SplitKind, SplitSpec};
use stringgp::gp::class_probability;
use stringgp::hyper::{select_full, GridChoice};
use stringgp::likelihood::expected_rate;
use stringgp::metrics::{self, CalibrationCurve, EvalReport, Timing};
use stringgp::select::{self, AnnealTrace, SelectionConfig};
use stringgp::sparse::{EvidenceObjective, SparseOptions};
use stringgp::{
    Alphabet, Dataset, FullGpModel, GaussianPosterior, KernelConfig, Likelihood, Sequence, SparseGpModel,
};

use crate::config::{ExperimentConfig, LikelihoodKind, ModelSpec, Task};
use crate::error::CliError;

/// Train and test data of one repeat.
#[derive(Clone, Debug)]
pub struct RepeatData {
    pub train: Dataset,
    pub test: Dataset,
    /// True Poisson rates of the test points (poisson_tf only).
    pub test_rates: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MethodResult {
    pub model: ModelSpec,
    pub order: usize,
    pub noise_variance: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub m: usize,
    pub selection_objective: Option<f64>,
    pub report: EvalReport,
    pub timing: Timing,
    pub calibration: Option<CalibrationCurve>,
    pub histogram: Option<Vec<usize>>,
    pub trace: Option<AnnealTrace>,
    pub inducing: Vec<Sequence>,
}

#[derive(Clone, Debug)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub hyper: GridChoice,
    pub methods: Vec<MethodResult>,
}

/// Dataset read once for file-backed tasks.
pub fn load_source(cfg: &ExperimentConfig) -> Result<Option<Dataset>, CliError> {
    let path = || {
        cfg.data
            .path
            .clone()
            .ok_or_else(|| CliError::Config("data.path is required".into()))
    };
    Ok(match cfg.task {
        Task::UciPromoters => Some(data::read_promoters(&path()?)?.dataset),
        Task::UciSplice => Some(data::read_splice(&path()?)?.dataset),
        Task::CustomCsv => {
            let symbols = cfg
                .data
                .alphabet
                .as_deref()
                .ok_or_else(|| CliError::Config("data.alphabet is required".into()))?;
            let alphabet = Alphabet::new(symbols.chars()).map_err(|e| CliError::Config(e.to_string()))?;
            let kind = cfg
                .data
                .target
                .ok_or_else(|| CliError::Config("data.target is required".into()))?;
            Some(data::load_dataset(&path()?, alphabet, kind)?)
        }
        _ => None,
    })
}

pub fn repeat_seed(cfg: &ExperimentConfig, repeat: usize) -> u64 {
    cfg.seed.wrapping_add(repeat as u64)
}

/// Generates or slices the data of repeat `r`. K-fold repeats walk through
/// the folds of one shuffle before reshuffling.
pub fn repeat_data(cfg: &ExperimentConfig, source: Option<&Dataset>, r: usize) -> Result<RepeatData, CliError> {
    let seed = repeat_seed(cfg, r);
    let (all, rates) = match cfg.task {
        Task::ToyRegression => (data::gen_binary_toy(cfg.data.n, cfg.data.length, seed)?.0, None),
        Task::ToyClassification => (data::gen_binary_toy(cfg.data.n, cfg.data.length, seed)?.1, None),
        Task::PoissonTf => {
            let (d, rates) = data::gen_poisson_tf(cfg.data.n, cfg.data.length, cfg.data.lambda0, seed)?;
            (d, Some(rates))
        }
        _ => (
            source
                .cloned()
                .ok_or_else(|| CliError::Config("no dataset loaded".into()))?,
            None,
        ),
    };
    let (spec, pick) = match cfg.split {
        SplitKind::Kfold { folds } => (
            SplitSpec {
                kind: cfg.split,
                seed: cfg.seed.wrapping_add((r / folds) as u64),
            },
            r % folds,
        ),
        kind => (SplitSpec { kind, seed }, 0),
    };
    let parts = split(all.len(), &spec).map_err(|e| CliError::Config(e.to_string()))?;
    let part = &parts[pick];
    let (train, test) = part.apply(&all);
    let test_rates = rates.map(|v| part.test.iter().map(|&i| v[i]).collect());
    Ok(RepeatData {
        train,
        test,
        test_rates,
    })
}

fn subsample(data: &Dataset, max: usize, seed: u64) -> Dataset {
    if data.len() <= max {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, data.len(), max).into_vec();
    idx.sort_unstable();
    data.subset(&idx)
}

fn likelihood_for(kind: LikelihoodKind, noise_variance: Option<f64>) -> Result<Likelihood, CliError> {
    Ok(match kind {
        LikelihoodKind::Gaussian => Likelihood::gaussian(noise_variance.unwrap_or(1.0))?,
        LikelihoodKind::Bernoulli => Likelihood::Bernoulli,
        LikelihoodKind::Poisson => Likelihood::Poisson,
    })
}

/// Spectrum order and noise variance by full-GP evidence on (a subsample
/// of) the training data. Nothing is searched when the grid has one order
/// and the likelihood has no noise parameter.
pub fn choose_hyper(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<GridChoice, CliError> {
    let kind = cfg.likelihood_kind();
    if kind != LikelihoodKind::Gaussian && cfg.kernel.orders.len() == 1 {
        return Ok(GridChoice {
            order: cfg.kernel.orders[0],
            noise_variance: None,
            log_evidence: f64::NAN,
        });
    }
    let sub = subsample(train, cfg.hyper_subsample, seed ^ 0x5eed);
    let grid = cfg.noise_grid.resolve()?;
    let lik = likelihood_for(kind, Some(1.0))?;
    Ok(select_full(&sub, &cfg.kernel.orders, cfg.kernel.normalized, &lik, &grid)?)
}

/// Metrics of a predictive posterior on the test targets.
pub fn evaluate(
    lik: &Likelihood,
    post: &GaussianPosterior,
    test: &Dataset,
    test_rates: Option<&[f64]>,
    bins: usize,
) -> Result<(EvalReport, Option<CalibrationCurve>), CliError> {
    let y = test.y();
    let mut report = EvalReport::default();
    let mut curve = None;
    if !y.is_empty() {
        report.test_log_likelihood = Some(metrics::test_log_likelihood(post, lik, &y)?);
    }
    match lik {
        Likelihood::Gaussian { .. } => {
            if !y.is_empty() {
                report.mse = Some(metrics::mse(post.mean.as_slice(), &y)?);
            }
        }
        Likelihood::Bernoulli => {
            let p = class_probability(post);
            let labels: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
            if labels.iter().any(|&l| l) {
                report.auprc = Some(metrics::auprc(&p, &labels)?);
            }
            let c = metrics::calibration(&p, &labels, bins)?;
            report.calibration_ad = metrics::calibration_ad(&c).ok();
            curve = Some(c);
        }
        Likelihood::Poisson => {
            let var = post.variance();
            let rate: Vec<f64> = post.mean.iter().zip(var.iter()).map(|(&m, &v)| expected_rate(m, v)).collect();
            if !y.is_empty() {
                report.mse = Some(metrics::mse(&rate, &y)?);
            }
            if let Some(r) = test_rates {
                report.mse_rates = Some(metrics::mse(&rate, r)?);
            }
        }
    }
    Ok((report, curve))
}

/// Fits and evaluates one model on one repeat.
pub fn run_model(
    cfg: &ExperimentConfig,
    spec: ModelSpec,
    rd: &RepeatData,
    hyper: &GridChoice,
    seed: u64,
) -> Result<MethodResult, CliError> {
    let kcfg = KernelConfig::new(hyper.order)?.with_normalization(cfg.kernel.normalized);
    let lik = likelihood_for(cfg.likelihood_kind(), hyper.noise_variance)?;
    let mut timing = Timing::default();
    let mut selection_objective = None;
    let mut trace = None;
    let mut inducing = Vec::new();
    let (post, log_evidence, n_train) = match spec.selection() {
        None => {
            let train = match cfg.full_subsample {
                Some(max) => subsample(&rd.train, max, seed ^ 0xf011),
                None => rd.train.clone(),
            };
            let t = Instant::now();
            let model = FullGpModel::fit(&train, &kcfg, lik)?;
            timing.fit = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let post = model.predict(rd.test.inputs(), false);
            timing.predict = t.elapsed().as_secs_f64();
            (post, model.log_evidence(), train.len())
        }
        Some(method) => {
            let scfg = SelectionConfig {
                method,
                seed,
                ..cfg.selection.clone()
            };
            let t = Instant::now();
            let objective = EvidenceObjective::new(&rd.train, &kcfg, lik, SparseOptions::default())?;
            let sel = select::select(&rd.train, &scfg, &objective)?;
            timing.selection = t.elapsed().as_secs_f64();
            selection_objective = sel.objective;
            trace = sel.trace;
            inducing = sel.set.points().to_vec();
            let t = Instant::now();
            let model = SparseGpModel::fit(&rd.train, &sel.set, &kcfg, lik, &SparseOptions::default())?;
            timing.fit = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let post = model.predict(rd.test.inputs(), false);
            timing.predict = t.elapsed().as_secs_f64();
            (post, model.log_evidence(), rd.train.len())
        }
    };
    let t = Instant::now();
    let (mut report, calibration) = evaluate(
        &lik,
        &post,
        &rd.test,
        rd.test_rates.as_deref(),
        cfg.calibration_bins,
    )?;
    timing.predict += t.elapsed().as_secs_f64();
    report.log_evidence = Some(log_evidence);
    let histogram = match (cfg.histogram_symbol(), inducing.is_empty()) {
        (Some(c), false) => {
            let z = stringgp::InducingSet::new(inducing.clone(), rd.train.alphabet())?;
            metrics::ones_histogram(&z, c).ok()
        }
        _ => None,
    };
    Ok(MethodResult {
        model: spec,
        order: hyper.order,
        noise_variance: hyper.noise_variance,
        n_train,
        n_test: rd.test.len(),
        m: inducing.len(),
        selection_objective,
        report,
        timing,
        calibration,
        histogram,
        trace,
        inducing,
    })
}

pub fn run_repeat(cfg: &ExperimentConfig, source: Option<&Dataset>, r: usize) -> Result<RepeatResult, CliError> {
    let seed = repeat_seed(cfg, r);
    let rd = repeat_data(cfg, source, r)?;
    let hyper = choose_hyper(cfg, &rd.train, seed)?;
    log::info!(
        "repeat {r}: n_train={} n_test={} order={} noise={:?}",
        rd.train.len(),
        rd.test.len(),
        hyper.order,
        hyper.noise_variance
    );
    let methods = cfg
        .methods
        .iter()
        .map(|&spec| run_model(cfg, spec, &rd, &hyper, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RepeatResult {
        repeat: r,
        seed,
        hyper,
        methods,
    })
}

/// Runs every repeat, in parallel, returning results in repeat order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RepeatResult>, CliError> {
    cfg.validate()?;
    let source = load_source(cfg)?;
    (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(cfg, source.as_ref(), r))
        .collect()
}

