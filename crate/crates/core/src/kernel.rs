//! Spectrum string kernel.
//!
//! `k(x, x') = <phi(x), phi(x')>` where `phi_a(x)` counts the occurrences of the
//! n-gram `a` in `x` (overlapping windows). Feature maps are built by sliding a
//! window over the string and counting, which is linear in the string length
//! for a fixed order, and the kernel is a sparse dot product of two maps.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Sequence;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub order: usize,
    /// Use `k(x,x') / sqrt(k(x,x) k(x',x'))` instead of the raw count product.
    #[serde(default)]
    pub normalized: bool,
}

impl KernelConfig {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder);
        }
        Ok(Self {
            order,
            normalized: false,
        })
    }

    pub fn with_normalization(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }
}

/// Sparse n-gram count vector. Zero counts are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumFeatures {
    order: usize,
    // sorted by gram
    grams: Vec<(Box<[u8]>, u32)>,
}

impl SpectrumFeatures {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of distinct n-grams.
    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn get(&self, gram: &str) -> u32 {
        self.lookup(gram.as_bytes())
    }

    fn lookup(&self, gram: &[u8]) -> u32 {
        self.grams
            .binary_search_by(|(g, _)| g.as_ref().cmp(gram))
            .map(|i| self.grams[i].1)
            .unwrap_or(0)
    }

    /// `(n-gram, count)` pairs in lexicographic order.
    pub fn counts(&self) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.grams
            .iter()
            .map(|(g, c)| (std::str::from_utf8(g).expect("ASCII grams"), *c))
    }

    pub fn total(&self) -> u64 {
        self.grams.iter().map(|(_, c)| *c as u64).sum()
    }

    /// `k(x, x) = ||phi(x)||^2`
    pub fn norm_sq(&self) -> f64 {
        self.grams.iter().map(|(_, c)| (*c as f64).powi(2)).sum()
    }
}

/// Counts every length-`order` window of `x`.
pub fn features(x: &Sequence, cfg: &KernelConfig) -> SpectrumFeatures {
    let order = cfg.order;
    let bytes = x.as_bytes();
    let mut counts: HashMap<&[u8], u32> = HashMap::new();
    if order > 0 && bytes.len() >= order {
        for w in bytes.windows(order) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    let mut grams: Vec<(Box<[u8]>, u32)> = counts
        .into_iter()
        .map(|(g, c)| (Box::from(g), c))
        .collect();
    grams.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    SpectrumFeatures { order, grams }
}

/// Double sum over all window pairs. Quadratic; kept as a reference.
pub fn kernel_naive(x: &Sequence, x2: &Sequence, cfg: &KernelConfig) -> f64 {
    let n = cfg.order;
    let (a, b) = (x.as_bytes(), x2.as_bytes());
    if n == 0 || a.len() < n || b.len() < n {
        return 0.0;
    }
    let mut total = 0u64;
    for i in 0..=a.len() - n {
        for j in 0..=b.len() - n {
            if a[i..i + n] == b[j..j + n] {
                total += 1;
            }
        }
    }
    total as f64
}

/// Sparse dot product of two feature maps.
pub fn kernel_fast(f1: &SpectrumFeatures, f2: &SpectrumFeatures) -> Result<f64> {
    if f1.order != f2.order {
        return Err(Error::OrderMismatch(f1.order, f2.order));
    }
    Ok(dot(f1, f2))
}

fn dot(f1: &SpectrumFeatures, f2: &SpectrumFeatures) -> f64 {
    let (small, large) = if f1.len() <= f2.len() {
        (f1, f2)
    } else {
        (f2, f1)
    };
    let mut acc = 0u64;
    for (g, c) in &small.grams {
        acc += *c as u64 * large.lookup(g) as u64;
    }
    acc as f64
}

/// Memoized feature maps keyed by sequence. Safe for concurrent use.
#[derive(Debug)]
pub struct FeatureCache {
    cfg: KernelConfig,
    map: RwLock<HashMap<Sequence, Arc<SpectrumFeatures>>>,
}

impl FeatureCache {
    pub fn new(cfg: KernelConfig) -> Self {
        Self {
            cfg,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn get(&self, x: &Sequence) -> Arc<SpectrumFeatures> {
        if let Some(f) = self.map.read().expect("cache lock").get(x) {
            return Arc::clone(f);
        }
        let f = Arc::new(features(x, &self.cfg));
        self.map
            .write()
            .expect("cache lock")
            .entry(x.clone())
            .or_insert(f)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().expect("cache lock").clear();
    }
}

/// Spectrum kernel bound to a configuration, with a feature cache shared by
/// every evaluation.
#[derive(Debug)]
pub struct SpectrumKernel {
    cache: FeatureCache,
}

impl SpectrumKernel {
    pub fn new(cfg: KernelConfig) -> Self {
        Self {
            cache: FeatureCache::new(cfg),
        }
    }

    pub fn config(&self) -> &KernelConfig {
        self.cache.config()
    }

    pub fn features(&self, x: &Sequence) -> Arc<SpectrumFeatures> {
        self.cache.get(x)
    }

    pub fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    pub fn eval(&self, x: &Sequence, y: &Sequence) -> f64 {
        let (fx, fy) = (self.features(x), self.features(y));
        self.eval_features(&fx, &fy)
    }

    fn eval_features(&self, fx: &SpectrumFeatures, fy: &SpectrumFeatures) -> f64 {
        let raw = dot(fx, fy);
        if self.config().normalized {
            let denom = (fx.norm_sq() * fy.norm_sq()).sqrt();
            if denom > 0.0 {
                raw / denom
            } else {
                0.0
            }
        } else {
            raw
        }
    }

    /// Prior variances `k(x, x)`.
    pub fn diag(&self, xs: &[Sequence]) -> Vec<f64> {
        xs.iter()
            .map(|x| {
                let f = self.features(x);
                self.eval_features(&f, &f)
            })
            .collect()
    }

    /// Kernel vector of one sequence against many.
    pub fn column(&self, z: &Sequence, xs: &[Sequence]) -> Vec<f64> {
        let fz = self.features(z);
        xs.iter()
            .map(|x| self.eval_features(&fz, &self.features(x)))
            .collect()
    }

    pub fn gram(&self, rows: &[Sequence], cols: &[Sequence]) -> GramMatrix {
        let fr: Vec<_> = rows.iter().map(|x| self.features(x)).collect();
        let fc: Vec<_> = cols.iter().map(|x| self.features(x)).collect();
        let data: Vec<Vec<f64>> = fr
            .par_iter()
            .map(|a| fc.iter().map(|b| self.eval_features(a, b)).collect())
            .collect();
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (i, row) in data.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        GramMatrix(m)
    }

    /// Square Gram matrix; each unordered pair is evaluated once.
    pub fn gram_symmetric(&self, xs: &[Sequence]) -> GramMatrix {
        let f: Vec<_> = xs.iter().map(|x| self.features(x)).collect();
        let upper: Vec<Vec<f64>> = (0..f.len())
            .into_par_iter()
            .map(|i| (i..f.len()).map(|j| self.eval_features(&f[i], &f[j])).collect())
            .collect();
        let n = xs.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in upper.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                m[(i, i + off)] = v;
                m[(i + off, i)] = v;
            }
        }
        GramMatrix(m)
    }
}

/// Gram matrix between two lists of sequences. Symmetric inputs
/// (`rows == cols`) only evaluate the upper triangle.
pub fn gram(rows: &[Sequence], cols: &[Sequence], cfg: &KernelConfig) -> GramMatrix {
    let k = SpectrumKernel::new(*cfg);
    if rows == cols {
        k.gram_symmetric(rows)
    } else {
        k.gram(rows, cols)
    }
}

/// Dense kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(pub DMatrix<f64>);

impl GramMatrix {
    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn transpose(&self) -> GramMatrix {
        GramMatrix(self.0.transpose())
    }

    pub fn mean_diagonal(&self) -> f64 {
        let n = self.nrows().min(self.ncols());
        if n == 0 {
            return 0.0;
        }
        self.0.diagonal().sum() / n as f64
    }

    /// Smallest eigenvalue of a square matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.nrows(),
                cols: self.ncols(),
            });
        }
        if self.nrows() == 0 {
            return Ok(0.0);
        }
        let eig = self.0.clone().symmetric_eigen();
        Ok(eig.eigenvalues.min())
    }

    /// `min eigenvalue >= -1e-8 * trace / n`
    pub fn is_psd(&self) -> Result<bool> {
        let n = self.nrows().max(1) as f64;
        let tol = 1e-8 * self.0.trace() / n;
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Row-major CSV with a header row of column indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..self.ncols()).map(|j| j.to_string()))?;
        for i in 0..self.nrows() {
            w.write_record((0..self.ncols()).map(|j| self.0[(i, j)].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `g + eps * I`
pub fn add_jitter(g: &GramMatrix, eps: f64) -> Result<GramMatrix> {
    if !g.is_square() {
        return Err(Error::NotSquare {
            rows: g.nrows(),
            cols: g.ncols(),
        });
    }
    let mut m = g.0.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += eps;
    }
    Ok(GramMatrix(m))
}
