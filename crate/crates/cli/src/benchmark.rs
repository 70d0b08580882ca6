//! Wall-clock sweep over training-set sizes, full GP against a sparse GP
//! with randomly chosen inducing points.

use std::io::Write;
use std::time::Instant;

use stringgp::data::{self, split, SplitSpec};
use stringgp::select::{select_random, SelectionConfig};
use stringgp::sparse::SparseOptions;
use stringgp::{Dataset, FullGpModel, KernelConfig, Likelihood, SparseGpModel};

use crate::config::{ExperimentConfig, LikelihoodKind, Task};
use crate::error::CliError;
use crate::experiment::load_source;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub model: &'static str,
    pub m: usize,
    pub selection_s: f64,
    pub fit_s: f64,
    pub predict_s: f64,
}

impl BenchRow {
    pub fn total(&self) -> f64 {
        self.selection_s + self.fit_s + self.predict_s
    }
}

fn sized_data(cfg: &ExperimentConfig, source: Option<&Dataset>, total: usize, seed: u64) -> Result<Dataset, CliError> {
    Ok(match cfg.task {
        Task::ToyRegression => data::gen_binary_toy(total, cfg.data.length, seed)?.0,
        Task::ToyClassification => data::gen_binary_toy(total, cfg.data.length, seed)?.1,
        Task::PoissonTf => data::gen_poisson_tf(total, cfg.data.length, cfg.data.lambda0, seed)?.0,
        _ => {
            let d = source.ok_or_else(|| CliError::Config("no dataset loaded".into()))?;
            if d.len() < total {
                return Err(CliError::Config(format!("benchmark needs {total} rows, file has {}", d.len())));
            }
            d.clone()
        }
    })
}

pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>, CliError> {
    cfg.validate()?;
    let b = cfg
        .benchmark
        .clone()
        .ok_or_else(|| CliError::Config("benchmark section is missing".into()))?;
    let source = load_source(cfg)?;
    let kcfg = KernelConfig::new(b.order)?.with_normalization(cfg.kernel.normalized);
    let lik = match cfg.likelihood_kind() {
        LikelihoodKind::Gaussian => Likelihood::gaussian(b.noise_variance)?,
        LikelihoodKind::Bernoulli => Likelihood::Bernoulli,
        LikelihoodKind::Poisson => Likelihood::Poisson,
    };
    let mut rows = Vec::new();
    for &n in &b.sizes {
        let all = sized_data(cfg, source.as_ref(), n + b.test_n, cfg.seed)?;
        let parts = split(all.len(), &SplitSpec::fixed(n, b.test_n, cfg.seed))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let (train, test) = parts[0].apply(&all);

        let t = Instant::now();
        let full = FullGpModel::fit(&train, &kcfg, lik)?;
        let fit_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let _ = full.predict(test.inputs(), false);
        let predict_s = t.elapsed().as_secs_f64();
        rows.push(BenchRow {
            n,
            model: "full",
            m: 0,
            selection_s: 0.0,
            fit_s,
            predict_s,
        });

        let scfg = SelectionConfig {
            m: b.m,
            seed: cfg.seed,
            ..cfg.selection.clone()
        };
        let t = Instant::now();
        let z = select_random(&train, &scfg)?;
        let selection_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let sparse = SparseGpModel::fit(&train, &z, &kcfg, lik, &SparseOptions::default())?;
        let fit_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let _ = sparse.predict(test.inputs(), false);
        let predict_s = t.elapsed().as_secs_f64();
        rows.push(BenchRow {
            n,
            model: "sparse",
            m: z.len(),
            selection_s,
            fit_s,
            predict_s,
        });
        log::info!("benchmark n={n} done");
    }
    Ok(rows)
}

pub fn write_benchmark<W: Write>(rows: &[BenchRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "model", "m", "selection_s", "fit_s", "predict_s", "total_s"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.model.to_string(),
            r.m.to_string(),
            r.selection_s.to_string(),
            r.fit_s.to_string(),
            r.predict_s.to_string(),
            r.total().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
