//! Experiment runner for string-domain Gaussian process models.

pub mod benchmark;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

use stringgp::data::save_dataset;

pub use config::ExperimentConfig;
pub use error::CliError;

/// Writes the train and test split of every repeat as `sequence,target` CSV.
pub fn gen_data(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let source = experiment::load_source(cfg)?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for r in 0..cfg.repeats {
        let rd = experiment::repeat_data(cfg, source.as_ref(), r)?;
        for (name, d) in [("train", &rd.train), ("test", &rd.test)] {
            let p = dir.join(format!("{name}_{r}.csv"));
            save_dataset(d, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Runs an experiment and writes its CSVs into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<experiment::RepeatResult>, CliError> {
    let results = experiment::run_experiment(cfg)?;
    output::write_all(&results, dir)?;
    Ok(results)
}
