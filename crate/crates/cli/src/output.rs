//! CSV files written by `run`.
//!
//! Everything except `timing.csv` is a pure function of the config and seed
//! and therefore byte-identical across runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use stringgp::metrics::{mean_se, EvalReport};

use crate::config::ModelSpec;
use crate::error::CliError;
use crate::experiment::{MethodResult, RepeatResult};

pub const RESULTS: &str = "results.csv";
pub const CALIBRATION: &str = "calibration.csv";
pub const HISTOGRAM: &str = "inducing_histogram.csv";
pub const TRACE: &str = "trace.csv";
pub const TIMING: &str = "timing.csv";
pub const INDUCING: &str = "inducing.csv";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Numeric columns of `results.csv` after `repeat` and `method`.
pub fn result_columns() -> Vec<&'static str> {
    let mut cols = vec!["order", "noise_variance", "m", "selection_objective"];
    cols.extend(EvalReport::FIELDS);
    cols
}

fn result_values(r: &MethodResult) -> Vec<Option<f64>> {
    let mut v = vec![
        Some(r.order as f64),
        r.noise_variance,
        Some(r.m as f64),
        r.selection_objective,
    ];
    v.extend(r.report.values());
    v
}

/// Methods in first-seen order.
fn method_order(results: &[RepeatResult]) -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for r in results {
        for m in &r.methods {
            if !out.contains(&m.model) {
                out.push(m.model);
            }
        }
    }
    out
}

/// Per-repeat rows followed by a `mean` and an `se` row for each method.
pub fn write_results<W: Write>(results: &[RepeatResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let cols = result_columns();
    let mut header = vec!["repeat", "method"];
    header.extend(&cols);
    w.write_record(&header)?;
    for r in results {
        for m in &r.methods {
            let mut row = vec![r.repeat.to_string(), m.model.name().to_string()];
            row.extend(result_values(m).into_iter().map(cell));
            w.write_record(&row)?;
        }
    }
    for spec in method_order(results) {
        let rows: Vec<Vec<Option<f64>>> = results
            .iter()
            .flat_map(|r| r.methods.iter().filter(|m| m.model == spec).map(result_values))
            .collect();
        let mut means = vec!["mean".to_string(), spec.name().to_string()];
        let mut ses = vec!["se".to_string(), spec.name().to_string()];
        for c in 0..cols.len() {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r[c]).collect();
            if vals.is_empty() {
                means.push(String::new());
                ses.push(String::new());
            } else {
                let (m, se) = mean_se(&vals);
                means.push(m.to_string());
                ses.push(se.to_string());
            }
        }
        w.write_record(&means)?;
        w.write_record(&ses)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_calibration<W: Write>(results: &[RepeatResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["repeat", "method", "bin_lo", "bin_hi", "mean_pred", "frac_pos", "count"])?;
    for r in results {
        for m in &r.methods {
            let Some(curve) = &m.calibration else { continue };
            for b in &curve.bins {
                w.write_record([
                    r.repeat.to_string(),
                    m.model.name().to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.mean_pred.to_string(),
                    b.frac_pos.to_string(),
                    b.count.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(results: &[RepeatResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["repeat", "method", "count", "frequency"])?;
    for r in results {
        for m in &r.methods {
            let Some(h) = &m.histogram else { continue };
            for (c, f) in h.iter().enumerate() {
                w.write_record([r.repeat.to_string(), m.model.name().to_string(), c.to_string(), f.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(results: &[RepeatResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["repeat", "method", "t", "T", "E", "objective", "accepted", "best_so_far"])?;
    for r in results {
        for m in &r.methods {
            let Some(trace) = &m.trace else { continue };
            for rec in &trace.records {
                w.write_record([
                    r.repeat.to_string(),
                    m.model.name().to_string(),
                    rec.t.to_string(),
                    rec.temperature.to_string(),
                    rec.energy.to_string(),
                    rec.objective.to_string(),
                    u8::from(rec.accepted).to_string(),
                    rec.best_so_far.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing<W: Write>(results: &[RepeatResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "repeat",
        "method",
        "n_train",
        "n_test",
        "m",
        "selection_s",
        "fit_s",
        "predict_s",
        "total_s",
    ])?;
    for r in results {
        for m in &r.methods {
            let t = &m.timing;
            w.write_record([
                r.repeat.to_string(),
                m.model.name().to_string(),
                m.n_train.to_string(),
                m.n_test.to_string(),
                m.m.to_string(),
                t.selection.to_string(),
                t.fit.to_string(),
                t.predict.to_string(),
                t.total().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_inducing<W: Write>(results: &[RepeatResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["repeat", "method", "index", "sequence"])?;
    for r in results {
        for m in &r.methods {
            for (i, z) in m.inducing.iter().enumerate() {
                w.write_record([r.repeat.to_string(), m.model.name().to_string(), i.to_string(), z.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_all(results: &[RepeatResult], dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let open = |name: &str| File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_results(results, open(RESULTS)?)?;
    write_calibration(results, open(CALIBRATION)?)?;
    write_histogram(results, open(HISTOGRAM)?)?;
    write_trace(results, open(TRACE)?)?;
    write_timing(results, open(TIMING)?)?;
    write_inducing(results, open(INDUCING)?)?;
    Ok(())
}

/// Per-method mean of a result column, for summaries.
pub fn method_means(results: &[RepeatResult], pick: impl Fn(&MethodResult) -> Option<f64>) -> BTreeMap<String, (f64, f64)> {
    let mut by: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in results {
        for m in &r.methods {
            if let Some(v) = pick(m) {
                by.entry(m.model.name().to_string()).or_default().push(v);
            }
        }
    }
    by.into_iter().map(|(k, v)| (k, mean_se(&v))).collect()
}
