//! SMOTE oversampling of the minority class to exact class parity.
//!
//! Each synthetic row is drawn on the segment between a minority row and one
//! of its k nearest minority neighbors (Euclidean metric over all columns).
//! Neighbor search is exact brute force; minority sets at this scale are
//! small. Applied to training folds only — the pipeline never hands test data
//! to this module.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seeding::stream;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmoteConfig {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: default_k(),
            seed: 0,
        }
    }
}

/// Oversample the minority class to parity with the majority class.
///
/// Output = all input rows in their original order, followed by the
/// synthetic minority rows. Synthetic rows inherit the patient key of their
/// base row. Deterministic given the seed.
pub fn smote(train: &FeatureMatrix, cfg: &SmoteConfig) -> Result<FeatureMatrix> {
    if cfg.k_neighbors == 0 {
        return Err(Error::InvalidConfig("k_neighbors must be >= 1".into()));
    }
    let n = train.n_rows();
    let pos: Vec<usize> = (0..n).filter(|&i| train.labels()[i] == 1).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| train.labels()[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, majority) = if pos.len() <= neg.len() {
        (&pos, &neg)
    } else {
        (&neg, &pos)
    };
    let need = majority.len() - minority.len();
    if need == 0 {
        return Ok(train.clone());
    }
    if minority.len() <= cfg.k_neighbors {
        return Err(Error::MinorityTooSmall {
            minority: minority.len(),
            k: cfg.k_neighbors,
        });
    }
    let minority_label = train.labels()[minority[0]];

    // k nearest minority neighbors of each minority row, excluding itself;
    // distance ties broken by lower row position for determinism.
    let k = cfg.k_neighbors;
    let neighbors: Vec<Vec<usize>> = minority
        .par_iter()
        .map(|&i| {
            let a = train.row(i);
            let mut dists: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(_, &j)| j != i)
                .map(|(pos_idx, &j)| (sq_dist(a, train.row(j)), pos_idx))
                .collect();
            dists.sort_by(|x, y| x.partial_cmp(y).unwrap());
            dists.truncate(k);
            dists.into_iter().map(|(_, pos_idx)| pos_idx).collect()
        })
        .collect();

    let d = train.n_cols();
    let mut values = train.values().to_vec();
    let mut labels = train.labels().to_vec();
    let mut keys = train.patient_keys().to_vec();
    values.reserve(need * d);

    let mut rng = stream(cfg.seed, &[]);
    for j in 0..need {
        let base_pos = j % minority.len();
        let base_row = train.row(minority[base_pos]);
        let nn_pos = neighbors[base_pos][rng.gen_range(0..k)];
        let nn_row = train.row(minority[nn_pos]);
        let lambda: f64 = rng.gen();
        values.extend(
            base_row
                .iter()
                .zip(nn_row)
                .map(|(&x, &x_nn)| x + lambda * (x_nn - x)),
        );
        labels.push(minority_label);
        keys.push(train.patient_keys()[minority[base_pos]].clone());
    }

    FeatureMatrix::from_parts(values, d, labels, keys, train.column_names().to_vec())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}
