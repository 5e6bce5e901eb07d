//! K-nearest-neighbors with banded dynamic time warping.
//!
//! Distance between two rows = DTW over the series columns (squared local
//! cost, Sakoe-Chiba band) plus `meta_weight` times the squared Euclidean
//! distance over the trailing metadata columns. Warping is meaningless over
//! unordered metadata, so metadata enters only through the additive term.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{Classifier, ModelOutput};
use crate::seeding::stream;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtwConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Sakoe-Chiba band radius in samples; values >= series length leave the
    /// warping unconstrained.
    #[serde(default = "default_band")]
    pub band_radius: usize,
    #[serde(default = "default_meta_weight")]
    pub meta_weight: f64,
    /// Leading columns treated as the time series; the rest are metadata.
    #[serde(default = "default_series_len")]
    pub series_len: usize,
    /// Optional cap on stored training rows, for runtime control.
    #[serde(default)]
    pub train_subsample: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    3
}
fn default_band() -> usize {
    10
}
fn default_meta_weight() -> f64 {
    1.0
}
fn default_series_len() -> usize {
    crate::dataset::TRIMMED_SERIES_LEN
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            k: default_k(),
            band_radius: default_band(),
            meta_weight: default_meta_weight(),
            series_len: default_series_len(),
            train_subsample: None,
            seed: 0,
        }
    }
}

/// Minimal accumulated squared-difference cost over monotone warping paths
/// within the band `|i - j| <= band_radius`.
pub fn dtw(a: &[f64], b: &[f64], band_radius: usize) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput);
    }
    if n.abs_diff(m) > band_radius {
        // the band cannot reach the (n, m) corner
        return Err(Error::BandTooNarrow {
            radius: band_radius,
            a: n,
            b: m,
        });
    }
    if n != m {
        return Err(Error::SeriesLengthMismatch { a: n, b: m });
    }
    let r = band_radius;

    // Two rolling rows, 1-based over the DP grid; stale cells are masked by
    // writing INF sentinels just outside each row's window.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        let lo = i.saturating_sub(r).max(1);
        let hi = (i + r).min(m);
        cur[lo - 1] = f64::INFINITY;
        for j in lo..=hi {
            let d = a[i - 1] - b[j - 1];
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = d * d + best;
        }
        if hi + 1 <= m {
            cur[hi + 1] = f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Fitted KNN model: stored training rows plus the distance config.
pub struct KnnModel {
    cfg: DtwConfig,
    train: FeatureMatrix,
}

/// Store the (possibly subsampled) training rows. No optimization happens.
pub fn knn_fit(train: &FeatureMatrix, cfg: &DtwConfig) -> Result<KnnModel> {
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if train.n_cols() < cfg.series_len {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} columns, series_len is {}",
            train.n_cols(),
            cfg.series_len
        )));
    }
    if cfg.band_radius > cfg.series_len {
        return Err(Error::InvalidConfig(
            "band_radius exceeds series length".into(),
        ));
    }
    let stored = match cfg.train_subsample {
        Some(cap) if cap < train.n_rows() => {
            let mut order: Vec<usize> = (0..train.n_rows()).collect();
            let mut rng = stream(cfg.seed, &[]);
            for i in 0..cap {
                let j = rng.gen_range(i..order.len());
                order.swap(i, j);
            }
            let mut keep = order[..cap].to_vec();
            keep.sort_unstable();
            train.subset(&keep)
        }
        _ => train.clone(),
    };
    if cfg.k > stored.n_rows() {
        return Err(Error::KTooLarge {
            k: cfg.k,
            n: stored.n_rows(),
        });
    }
    Ok(KnnModel {
        cfg: cfg.clone(),
        train: stored,
    })
}

impl KnnModel {
    pub fn n_stored(&self) -> usize {
        self.train.n_rows()
    }

    /// Combined distance between two rows: DTW over the series prefix plus
    /// weighted squared Euclidean distance over the metadata suffix.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let s = self.cfg.series_len;
        let mut d = dtw(&a[..s], &b[..s], self.cfg.band_radius)?;
        if a.len() > s {
            d += self.cfg.meta_weight
                * a[s..]
                    .iter()
                    .zip(&b[s..])
                    .map(|(&x, &y)| (x - y) * (x - y))
                    .sum::<f64>();
        }
        Ok(d)
    }

    /// Class-probability rows: neighbor label counts over the k nearest
    /// training rows, distance ties broken by lower training-row index.
    pub fn predict_proba(&self, test: &FeatureMatrix) -> Result<Vec<[f64; 2]>> {
        if test.n_cols() != self.train.n_cols() {
            return Err(Error::ColumnMismatch {
                expected: self.train.n_cols(),
                found: test.n_cols(),
            });
        }
        let k = self.cfg.k;
        (0..test.n_rows())
            .into_par_iter()
            .map(|t| {
                let row = test.row(t);
                let mut dists: Vec<(f64, usize)> = Vec::with_capacity(self.train.n_rows());
                for i in 0..self.train.n_rows() {
                    dists.push((self.distance(row, self.train.row(i))?, i));
                }
                dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                let votes = dists[..k]
                    .iter()
                    .filter(|&&(_, i)| self.train.labels()[i] == 1)
                    .count();
                let p1 = votes as f64 / k as f64;
                Ok([1.0 - p1, p1])
            })
            .collect()
    }
}

impl Classifier for KnnModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        Ok(ModelOutput::Proba(self.predict_proba(x)?))
    }
}
