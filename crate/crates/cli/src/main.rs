use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stringgp_cli::{benchmark, gen_data, plot, run_to_dir, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "stringgp", version, about = "Sparse Gaussian processes over strings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV results.
    Run(Common),
    /// Time full and sparse models across training-set sizes.
    Benchmark(Common),
    /// Render SVG plots from the CSVs in a results directory.
    Plot { dir: PathBuf },
    /// Write the generated or loaded train/test splits as CSV.
    GenData(Common),
}

fn prepare(c: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = c
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    cfg.validate()?;
    Ok((cfg, out))
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(c) => {
            let (cfg, out) = prepare(&c)?;
            run_to_dir(&cfg, &out)?;
            eprintln!("results written to {}", out.display());
        }
        Command::Benchmark(c) => {
            let (cfg, out) = prepare(&c)?;
            let rows = benchmark::run_benchmark(&cfg)?;
            std::fs::create_dir_all(&out)?;
            benchmark::write_benchmark(&rows, std::fs::File::create(out.join("benchmark.csv"))?)?;
            eprintln!("benchmark written to {}", out.join("benchmark.csv").display());
        }
        Command::Plot { dir } => {
            for p in plot::plot_dir(&dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::GenData(c) => {
            let (cfg, out) = prepare(&c)?;
            let files = gen_data(&cfg, &out)?;
            eprintln!("{} files written to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
