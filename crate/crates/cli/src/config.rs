//! Experiment configuration, read from JSON. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stringgp::data::SplitKind;
use stringgp::hyper::log_grid;
use stringgp::select::{Method, SelectionConfig};
use stringgp::TargetKind;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ToyRegression,
    ToyClassification,
    PoissonTf,
    UciPromoters,
    UciSplice,
    CustomCsv,
}

/// A model to evaluate: the full GP or a sparse GP with a selection method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Full,
    Random,
    Greedy,
    GreedySubset,
    Sa,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Full => "full",
            ModelSpec::Random => "random",
            ModelSpec::Greedy => "greedy",
            ModelSpec::GreedySubset => "greedy_subset",
            ModelSpec::Sa => "sa",
        }
    }

    pub fn selection(&self) -> Option<Method> {
        match self {
            ModelSpec::Full => None,
            ModelSpec::Random => Some(Method::Random),
            ModelSpec::Greedy => Some(Method::Greedy),
            ModelSpec::GreedySubset => Some(Method::GreedySubset),
            ModelSpec::Sa => Some(Method::Sa),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    Gaussian,
    Bernoulli,
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Number of generated strings (synthetic tasks).
    pub n: usize,
    /// Length of generated strings (synthetic tasks).
    pub length: usize,
    /// Poisson rate per `A` (poisson_tf).
    pub lambda0: f64,
    /// Input file (UCI and custom tasks). Relative paths resolve against the
    /// config file's directory.
    pub path: Option<PathBuf>,
    /// Alphabet symbols for custom_csv.
    pub alphabet: Option<String>,
    /// Target type for custom_csv.
    pub target: Option<TargetKind>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n: 100,
            length: 10,
            lambda0: 1.0,
            path: None,
            alphabet: None,
            target: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub orders: Vec<usize>,
    pub normalized: bool,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 3, 4, 5],
            normalized: false,
        }
    }
}

/// Noise variances searched for Gaussian likelihoods: explicit `values`, or
/// `points` log-spaced values in `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseGrid {
    pub values: Option<Vec<f64>>,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        Self {
            values: None,
            lo: 1e-4,
            hi: 1e1,
            points: 10,
        }
    }
}

impl NoiseGrid {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        match &self.values {
            Some(v) if v.is_empty() || v.iter().any(|s| !(*s > 0.0)) => {
                Err(CliError::Config("noise_grid.values must be positive and non-empty".into()))
            }
            Some(v) => Ok(v.clone()),
            None => log_grid(self.lo, self.hi, self.points).map_err(|e| CliError::Config(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub data: DataConfig,
    pub kernel: KernelSection,
    /// Defaults to the task's natural likelihood.
    pub likelihood: Option<LikelihoodKind>,
    pub noise_grid: NoiseGrid,
    /// Hyperparameters are chosen on at most this many training points.
    pub hyper_subsample: usize,
    pub methods: Vec<ModelSpec>,
    /// Selection settings shared by the sparse methods; the seed is replaced
    /// per repeat.
    pub selection: SelectionConfig,
    /// Train the full GP on at most this many training points.
    pub full_subsample: Option<usize>,
    pub split: SplitKind,
    pub repeats: usize,
    pub seed: u64,
    pub calibration_bins: usize,
    /// Symbol counted in the inducing-string histogram; defaults to `1` for
    /// the toy tasks and `A` for poisson_tf.
    pub histogram_char: Option<char>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub benchmark: Option<BenchmarkConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::ToyRegression,
            data: DataConfig::default(),
            kernel: KernelSection::default(),
            likelihood: None,
            noise_grid: NoiseGrid::default(),
            hyper_subsample: 500,
            methods: vec![ModelSpec::Full, ModelSpec::Random, ModelSpec::Greedy, ModelSpec::Sa],
            selection: SelectionConfig::default(),
            full_subsample: None,
            split: SplitKind::Fraction { train_fraction: 0.6 },
            repeats: 20,
            seed: 0,
            calibration_bins: 10,
            histogram_char: None,
            output: None,
            threads: None,
            benchmark: None,
        }
    }
}

/// Size sweep for the `benchmark` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub sizes: Vec<usize>,
    pub test_n: usize,
    pub m: usize,
    pub order: usize,
    pub noise_variance: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            sizes: vec![200, 400, 800],
            test_n: 200,
            m: 50,
            order: 3,
            noise_variance: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config; a relative data path is resolved against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.data.path, path.parent()) {
            if p.is_relative() {
                cfg.data.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn likelihood_kind(&self) -> LikelihoodKind {
        self.likelihood.unwrap_or(match self.task {
            Task::ToyRegression => LikelihoodKind::Gaussian,
            Task::ToyClassification | Task::UciPromoters | Task::UciSplice => LikelihoodKind::Bernoulli,
            Task::PoissonTf => LikelihoodKind::Poisson,
            Task::CustomCsv => match self.data.target {
                Some(TargetKind::Binary) => LikelihoodKind::Bernoulli,
                Some(TargetKind::Counts) => LikelihoodKind::Poisson,
                _ => LikelihoodKind::Gaussian,
            },
        })
    }

    pub fn histogram_symbol(&self) -> Option<char> {
        self.histogram_char.or(match self.task {
            Task::ToyRegression | Task::ToyClassification => Some('1'),
            Task::PoissonTf => Some('A'),
            _ => None,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.repeats < 1 {
            return bad("repeats must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.kernel.orders.is_empty() || self.kernel.orders.contains(&0) {
            return bad("kernel.orders must be non-empty and positive".into());
        }
        if self.calibration_bins < 1 {
            return bad("calibration_bins must be at least 1".into());
        }
        if self.hyper_subsample < 1 {
            return bad("hyper_subsample must be at least 1".into());
        }
        if self.full_subsample == Some(0) {
            return bad("full_subsample must be at least 1".into());
        }
        if !(self.data.lambda0 > 0.0) {
            return bad("data.lambda0 must be positive".into());
        }
        self.noise_grid.resolve()?;
        if self.methods.iter().any(|m| m.selection().is_some()) {
            self.selection
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        match self.task {
            Task::UciPromoters | Task::UciSplice | Task::CustomCsv => match &self.data.path {
                None => return bad(format!("task {:?} needs data.path", self.task)),
                Some(p) if !p.is_file() => return bad(format!("data file {} not found", p.display())),
                _ => {}
            },
            _ => {
                if self.data.n < 2 {
                    return bad("data.n must be at least 2".into());
                }
            }
        }
        if self.task == Task::CustomCsv && (self.data.alphabet.is_none() || self.data.target.is_none()) {
            return bad("custom_csv needs data.alphabet and data.target".into());
        }
        if let Some(b) = &self.benchmark {
            if b.m == 0 {
                return bad("benchmark.m must be at least 1".into());
            }
            if b.sizes.is_empty() || b.sizes.contains(&0) || b.order == 0 || b.test_n == 0 {
                return bad("benchmark sizes, order and test_n must be positive".into());
            }
            if !(b.noise_variance > 0.0) {
                return bad("benchmark.noise_variance must be positive".into());
            }
        }
        Ok(())
    }
}
