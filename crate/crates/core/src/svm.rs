//! Binary soft-margin SVM trained by sequential minimal optimization.
//!
//! Working pairs are chosen by the first-order heuristic (max |E_i - E_j|)
//! inside Platt-style alternation between full passes and passes over
//! non-bound points. Features are z-scored (train-fit) before the kernel by
//! default; degree-5 polynomial kernels overflow on microvolt-scale inputs
//! otherwise. A bounded LRU row cache backs kernel evaluations, upgraded to
//! the full Gram matrix for small problems.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{Classifier, ModelOutput};
use crate::seeding::stream;

/// Kernel with a possibly unresolved gamma (`None` means `1/d` at fit time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Poly {
        #[serde(default = "default_degree")]
        degree: u32,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "default_coef0")]
        coef0: f64,
    },
    Rbf {
        #[serde(default)]
        gamma: Option<f64>,
    },
}

fn default_degree() -> u32 {
    5
}
fn default_coef0() -> f64 {
    1.0
}

/// Fully resolved kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Poly { degree: u32, gamma: f64, coef0: f64 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn resolve(self, n_features: usize) -> Kernel {
        let auto = 1.0 / n_features as f64;
        match self {
            KernelSpec::Poly {
                degree,
                gamma,
                coef0,
            } => Kernel::Poly {
                degree,
                gamma: gamma.unwrap_or(auto),
                coef0,
            },
            KernelSpec::Rbf { gamma } => Kernel::Rbf {
                gamma: gamma.unwrap_or(auto),
            },
        }
    }
}

/// `k_poly = (gamma <x,z> + coef0)^degree`, `k_rbf = exp(-gamma ||x-z||^2)`.
pub fn kernel_eval(kind: &Kernel, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimMismatch {
            a: x.len(),
            b: z.len(),
        });
    }
    Ok(kernel_eval_unchecked(kind, x, z))
}

fn kernel_eval_unchecked(kind: &Kernel, x: &[f64], z: &[f64]) -> f64 {
    match *kind {
        Kernel::Poly {
            degree,
            gamma,
            coef0,
        } => {
            let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
            (gamma * dot + coef0).powi(degree as i32)
        }
        Kernel::Rbf { gamma } => {
            let sq: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * sq).exp()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: KernelSpec,
    #[serde(default = "default_c")]
    pub c: f64,
    /// KKT tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Cap on optimization sweeps; hitting it returns an unconverged model.
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default)]
    pub seed: u64,
    /// z-score features on train statistics before the kernel.
    #[serde(default = "default_standardize")]
    pub standardize: bool,
    /// Record the dual objective after every accepted pair update.
    #[serde(default)]
    pub track_objective: bool,
}

fn default_c() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_passes() -> usize {
    1000
}
fn default_standardize() -> bool {
    true
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            kernel: KernelSpec::Rbf { gamma: None },
            c: default_c(),
            tol: default_tol(),
            max_passes: default_max_passes(),
            seed: 0,
            standardize: default_standardize(),
            track_objective: false,
        }
    }
}

pub struct SvmModel {
    kernel: Kernel,
    support: Vec<Vec<f64>>,
    alpha_y: Vec<f64>,
    bias: f64,
    scaler: Option<(Vec<f64>, Vec<f64>)>,
    n_cols: usize,
    pub converged: bool,
    pub passes: usize,
    /// Worst KKT residual over all training points at exit.
    pub max_kkt_violation: f64,
    /// Dual objective after each accepted step (when tracking was on).
    pub objective_trace: Vec<f64>,
    /// |sum alpha_i y_i| at exit; the pairwise updates preserve zero.
    pub equality_residual: f64,
}

impl SvmModel {
    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn alpha_y(&self) -> &[f64] {
        &self.alpha_y
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// `sum alpha_i y_i k(x_i, x) + b` on an unstandardized input row.
    pub fn decision_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_cols {
            return Err(Error::ColumnMismatch {
                expected: self.n_cols,
                found: row.len(),
            });
        }
        let standardized;
        let row = match &self.scaler {
            Some((mean, sd)) => {
                standardized = row
                    .iter()
                    .enumerate()
                    .map(|(c, v)| (v - mean[c]) / sd[c])
                    .collect::<Vec<f64>>();
                &standardized[..]
            }
            None => row,
        };
        let mut score = self.bias;
        for (sv, ay) in self.support.iter().zip(&self.alpha_y) {
            score += ay * kernel_eval_unchecked(&self.kernel, sv, row);
        }
        Ok(score)
    }

    pub fn decision_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.decision_score(x.row(i)))
            .collect()
    }
}

impl Classifier for SvmModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        Ok(ModelOutput::Scores(self.decision_scores(x)?))
    }
}

/// Kernel rows on demand: the full Gram matrix for small problems, otherwise
/// an LRU cache of rows.
struct KernelCache<'a> {
    rows: &'a [Vec<f64>],
    kernel: Kernel,
    full: Option<Vec<f64>>,
    lru: HashMap<usize, (Vec<f64>, u64)>,
    capacity: usize,
    clock: u64,
}

const FULL_GRAM_MAX_ROWS: usize = 3000;

impl<'a> KernelCache<'a> {
    fn new(rows: &'a [Vec<f64>], kernel: Kernel) -> Self {
        use rayon::prelude::*;
        let n = rows.len();
        let full = if n <= FULL_GRAM_MAX_ROWS {
            Some(
                (0..n * n)
                    .into_par_iter()
                    .map(|idx| kernel_eval_unchecked(&kernel, &rows[idx / n], &rows[idx % n]))
                    .collect(),
            )
        } else {
            None
        };
        KernelCache {
            rows,
            kernel,
            full,
            lru: HashMap::new(),
            capacity: 256,
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.rows.len();
        if let Some(full) = &self.full {
            return &full[i * n..(i + 1) * n];
        }
        self.clock += 1;
        let clock = self.clock;
        if !self.lru.contains_key(&i) {
            if self.lru.len() >= self.capacity {
                let oldest = *self
                    .lru
                    .iter()
                    .min_by_key(|(_, (_, stamp))| *stamp)
                    .map(|(k, _)| k)
                    .unwrap();
                self.lru.remove(&oldest);
            }
            use rayon::prelude::*;
            let row: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|j| kernel_eval_unchecked(&self.kernel, &self.rows[i], &self.rows[j]))
                .collect();
            self.lru.insert(i, (row, clock));
        }
        let entry = self.lru.get_mut(&i).unwrap();
        entry.1 = clock;
        &entry.0
    }
}

/// Train by SMO. Labels are mapped 0 -> -1, 1 -> +1. Hitting `max_passes`
/// returns the partially optimized model with `converged = false`.
pub fn svm_fit(train: &FeatureMatrix, cfg: &SvmConfig) -> Result<SvmModel> {
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidConfig("C must be > 0".into()));
    }
    let n = train.n_rows();
    let pos = train.labels().iter().filter(|&&l| l == 1).count();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }

    let scaler = if cfg.standardize {
        Some(fit_scaler(train))
    } else {
        None
    };
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| match &scaler {
            Some((mean, sd)) => train
                .row(i)
                .iter()
                .enumerate()
                .map(|(c, v)| (v - mean[c]) / sd[c])
                .collect(),
            None => train.row(i).to_vec(),
        })
        .collect();
    let y: Vec<f64> = train
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let kernel = cfg.kernel.resolve(train.n_cols());

    let mut solver = Smo {
        cache: KernelCache::new(&rows, kernel),
        y: &y,
        alpha: vec![0.0; n],
        errors: y.iter().map(|yi| -yi).collect(), // f = 0 initially
        b: 0.0,
        c: cfg.c,
        tol: cfg.tol,
        rng: stream(cfg.seed, &[]),
        objective_trace: Vec::new(),
        track_objective: cfg.track_objective,
    };
    let (converged, passes) = solver.run(cfg.max_passes);
    if !converged {
        log::warn!("SMO hit max_passes={} without converging", cfg.max_passes);
    }

    let max_kkt_violation = solver.max_kkt_violation();
    let equality_residual = solver
        .alpha
        .iter()
        .zip(&y)
        .map(|(a, yi)| a * yi)
        .sum::<f64>()
        .abs();

    let mut support = Vec::new();
    let mut alpha_y = Vec::new();
    for i in 0..n {
        if solver.alpha[i] > 0.0 {
            support.push(rows[i].clone());
            alpha_y.push(solver.alpha[i] * y[i]);
        }
    }
    Ok(SvmModel {
        kernel,
        support,
        alpha_y,
        bias: solver.b,
        scaler,
        n_cols: train.n_cols(),
        converged,
        passes,
        max_kkt_violation,
        objective_trace: solver.objective_trace,
        equality_residual,
    })
}

fn fit_scaler(train: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = train.n_rows() as f64;
    let d = train.n_cols();
    let mut mean = vec![0.0; d];
    for i in 0..train.n_rows() {
        for (c, v) in train.row(i).iter().enumerate() {
            mean[c] += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for i in 0..train.n_rows() {
        for (c, v) in train.row(i).iter().enumerate() {
            var[c] += (v - mean[c]) * (v - mean[c]);
        }
    }
    let sd = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

struct Smo<'a> {
    cache: KernelCache<'a>,
    y: &'a [f64],
    alpha: Vec<f64>,
    /// E_i = f(x_i) - y_i with f(x) = sum alpha y k + b.
    errors: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
    rng: rand_chacha::ChaCha8Rng,
    objective_trace: Vec<f64>,
    track_objective: bool,
}

impl Smo<'_> {
    fn run(&mut self, max_passes: usize) -> (bool, usize) {
        let n = self.y.len();
        let mut examine_all = true;
        let mut passes = 0;
        loop {
            if passes >= max_passes {
                return (false, passes);
            }
            passes += 1;
            let mut changed = 0usize;
            if examine_all {
                for i in 0..n {
                    changed += self.examine(i) as usize;
                }
                if changed == 0 {
                    return (true, passes);
                }
                examine_all = false;
            } else {
                for i in 0..n {
                    if self.is_non_bound(i) {
                        changed += self.examine(i) as usize;
                    }
                }
                if changed == 0 {
                    examine_all = true;
                }
            }
        }
    }

    fn is_non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn snap(&self, a: f64) -> f64 {
        if a < 1e-12 * self.c {
            0.0
        } else if a > self.c * (1.0 - 1e-12) {
            self.c
        } else {
            a
        }
    }

    fn examine(&mut self, i2: usize) -> bool {
        let e2 = self.errors[i2];
        let r2 = e2 * self.y[i2];
        let violated =
            (r2 < -self.tol && self.alpha[i2] < self.c) || (r2 > self.tol && self.alpha[i2] > 0.0);
        if !violated {
            return false;
        }
        let n = self.y.len();

        // first-order heuristic: partner with the largest |E1 - E2|
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if i != i2 && self.is_non_bound(i) {
                let gap = (self.errors[i] - e2).abs();
                if best.is_none_or(|(g, _)| gap > g) {
                    best = Some((gap, i));
                }
            }
        }
        if let Some((_, i1)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // fall back to scans from seeded random start points
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if i1 != i2 && self.is_non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if i1 != i2 && self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let k11 = self.cache.row(i1)[i1];
        let k12 = self.cache.row(i1)[i2];
        let k22 = self.cache.row(i2)[i2];
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2 = if eta > 1e-12 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // objective is linear along the constraint line
            let slope = y2 * (e1 - e2);
            if slope > 0.0 {
                hi
            } else if slope < 0.0 {
                lo
            } else {
                return false;
            }
        };
        if (a2 - a2_old).abs() < 1e-9 * (a2 + a2_old + 1e-9) {
            return false;
        }
        // snap to the box so 1-ULP residues never masquerade as interior
        a2 = self.snap(a2);
        if a2 == a2_old {
            return false;
        }
        let a1 = self.snap((a1_old + s * (a2_old - a2)).clamp(0.0, self.c));

        let d1 = (a1 - a1_old) * y1;
        let d2 = (a2 - a2_old) * y2;
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let b_new = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = b_new - self.b;

        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.b = b_new;
        let row1: Vec<f64> = self.cache.row(i1).to_vec();
        let row2 = self.cache.row(i2);
        for k in 0..self.y.len() {
            self.errors[k] += d1 * row1[k] + d2 * row2[k] + db;
        }
        if self.track_objective {
            let w = self.dual_objective();
            self.objective_trace.push(w);
        }
        true
    }

    /// W(alpha) = sum alpha - 1/2 sum_i alpha_i y_i (f_i - b).
    fn dual_objective(&self) -> f64 {
        let mut w = 0.0;
        for i in 0..self.y.len() {
            let f_i = self.errors[i] + self.y[i];
            w += self.alpha[i] - 0.5 * self.alpha[i] * self.y[i] * (f_i - self.b);
        }
        w
    }

    fn max_kkt_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.y.len() {
            let yf = self.y[i] * (self.errors[i] + self.y[i]);
            let v = if self.alpha[i] <= 0.0 {
                1.0 - yf
            } else if self.alpha[i] >= self.c {
                yf - 1.0
            } else {
                (yf - 1.0).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}
