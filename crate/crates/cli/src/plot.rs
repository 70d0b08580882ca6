//! Static SVG renderings of `calibration.csv` and `inducing_histogram.csv`.
//! Repeats are pooled per method.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::output::{CALIBRATION, HISTOGRAM};

const W: f64 = 400.0;
const H: f64 = 400.0;
const PAD: f64 = 40.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PooledBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub sum_pred: f64,
    pub sum_pos: f64,
}

impl PooledBin {
    pub fn point(&self) -> Option<(f64, f64)> {
        (self.count > 0).then(|| (self.sum_pred / self.count as f64, self.sum_pos / self.count as f64))
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64, CliError> {
    s.parse()
        .map_err(|_| CliError::MissingInput(format!("unparseable {what} value {s:?}")))
}

/// Calibration bins pooled over repeats, keyed by method.
pub fn pooled_calibration(path: &Path) -> Result<BTreeMap<String, Vec<PooledBin>>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<String, Vec<PooledBin>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let (method, lo, hi) = (&rec[1], parse_f64(&rec[2], "bin_lo")?, parse_f64(&rec[3], "bin_hi")?);
        let count: u64 = rec[6].parse().map_err(|_| CliError::MissingInput("bad count".into()))?;
        let bins = out.entry(method.to_string()).or_default();
        let idx = match bins.iter().position(|b| b.lo == lo && b.hi == hi) {
            Some(i) => i,
            None => {
                bins.push(PooledBin { lo, hi, ..Default::default() });
                bins.len() - 1
            }
        };
        if count > 0 {
            let b = &mut bins[idx];
            b.count += count;
            b.sum_pred += count as f64 * parse_f64(&rec[4], "mean_pred")?;
            b.sum_pos += count as f64 * parse_f64(&rec[5], "frac_pos")?;
        }
    }
    for bins in out.values_mut() {
        bins.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    }
    Ok(out)
}

/// Inducing-string symbol counts summed over repeats, keyed by method.
pub fn pooled_histogram(path: &Path) -> Result<BTreeMap<String, Vec<u64>>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let c: usize = rec[2].parse().map_err(|_| CliError::MissingInput("bad count".into()))?;
        let f: u64 = rec[3].parse().map_err(|_| CliError::MissingInput("bad frequency".into()))?;
        let h = out.entry(rec[1].to_string()).or_default();
        if h.len() <= c {
            h.resize(c + 1, 0);
        }
        h[c] += f;
    }
    Ok(out)
}

fn sx(x: f64) -> f64 {
    PAD + x * (W - 2.0 * PAD)
}

fn sy(y: f64) -> f64 {
    H - PAD - y * (H - 2.0 * PAD)
}

fn frame(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
}

/// Reliability diagram: diagonal reference plus one point per occupied bin.
pub fn calibration_svg(method: &str, bins: &[PooledBin]) -> String {
    let mut svg = String::new();
    frame(&mut svg, &format!("calibration: {method}"));
    let _ = writeln!(
        svg,
        r#"<line class="diagonal" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="gray" stroke-dasharray="4 4"/>"#,
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    );
    let pts: Vec<(f64, f64)> = bins.iter().filter_map(PooledBin::point).collect();
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.3},{:.3}", sx(*x), sy(*y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="curve" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        path.join(" ")
    );
    for (x, y) in &pts {
        let _ = writeln!(
            svg,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#,
            sx(*x),
            sy(*y)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">predicted probability</text>"#,
        W / 2.0,
        H - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Bar chart of inducing-string symbol counts.
pub fn histogram_svg(method: &str, counts: &[u64]) -> String {
    let mut svg = String::new();
    frame(&mut svg, &format!("inducing strings: {method}"));
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let k = counts.len().max(1) as f64;
    let bw = (W - 2.0 * PAD) / k;
    for (c, &f) in counts.iter().enumerate() {
        let h = f as f64 / max * (H - 2.0 * PAD);
        let _ = writeln!(
            svg,
            r#"<rect class="bar" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="steelblue" stroke="white"/>"#,
            PAD + c as f64 * bw,
            H - PAD - h,
            bw,
            h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{c}</text>"#,
            PAD + (c as f64 + 0.5) * bw,
            H - PAD + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders every plot derivable from the CSVs in `dir` and returns the
/// files written.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let cal = dir.join(CALIBRATION);
    let hist = dir.join(HISTOGRAM);
    if !cal.is_file() && !hist.is_file() {
        return Err(CliError::MissingInput(format!(
            "neither {CALIBRATION} nor {HISTOGRAM} found in {}",
            dir.display()
        )));
    }
    let mut written = Vec::new();
    if cal.is_file() {
        for (method, bins) in pooled_calibration(&cal)? {
            let p = dir.join(format!("calibration_{method}.svg"));
            std::fs::write(&p, calibration_svg(&method, &bins))?;
            written.push(p);
        }
    }
    if hist.is_file() {
        for (method, counts) in pooled_histogram(&hist)? {
            let p = dir.join(format!("histogram_{method}.svg"));
            std::fs::write(&p, histogram_svg(&method, &counts))?;
            written.push(p);
        }
    }
    Ok(written)
}
