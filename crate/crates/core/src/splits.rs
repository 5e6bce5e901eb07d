//! Patient-grouped train/test partitions.
//!
//! Every split assigns each patient wholly to one side, so no patient
//! contributes rows to both train and test. The seven-patient default draws
//! seven distinct 4/3 partitions uniformly from the 35 possible ones.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seeding::stream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub train_patients: BTreeSet<String>,
    pub test_patients: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub splits: Vec<SplitEntry>,
    pub seed: u64,
}

/// Sample `n_splits` distinct patient partitions uniformly without
/// replacement. Train size is `ceil(4/7 * n_patients)`; with 7 patients that
/// is the 4-train / 3-test scheme.
pub fn make_splits(patients: &BTreeSet<String>, n_splits: usize, seed: u64) -> Result<SplitPlan> {
    let p = patients.len();
    if p < 4 {
        return Err(Error::TooFewPatients { min: 4, got: p });
    }
    if n_splits == 0 {
        return Err(Error::InvalidConfig("n_splits must be >= 1".into()));
    }
    let train_size = (4 * p).div_ceil(7);
    let total = binomial(p, train_size);
    if n_splits as u128 > total {
        return Err(Error::TooManySplitsRequested {
            requested: n_splits,
            available: total.min(usize::MAX as u128) as usize,
        });
    }

    let ids: Vec<&String> = patients.iter().collect();
    let mut rng = stream(seed, &[crate::seeding::TAG_SPLIT_PLAN]);

    // Small spaces: enumerate every train-side combination and take a seeded
    // partial shuffle. Large spaces: rejection-sample distinct combinations.
    let chosen: Vec<Vec<usize>> = if total <= 100_000 {
        let mut combos = combinations(p, train_size);
        for i in 0..n_splits {
            let j = rng.gen_range(i..combos.len());
            combos.swap(i, j);
        }
        combos.truncate(n_splits);
        combos
    } else {
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut out = Vec::with_capacity(n_splits);
        let mut pool: Vec<usize> = (0..p).collect();
        while out.len() < n_splits {
            for i in 0..train_size {
                let j = rng.gen_range(i..p);
                pool.swap(i, j);
            }
            let mut combo = pool[..train_size].to_vec();
            combo.sort_unstable();
            if seen.insert(combo.clone()) {
                out.push(combo);
            }
        }
        out
    };

    let splits = chosen
        .into_iter()
        .map(|combo| {
            let train: BTreeSet<String> = combo.iter().map(|&i| ids[i].clone()).collect();
            let test: BTreeSet<String> = ids
                .iter()
                .filter(|id| !train.contains(**id))
                .map(|id| (*id).clone())
                .collect();
            SplitEntry {
                train_patients: train,
                test_patients: test,
            }
        })
        .collect();
    Ok(SplitPlan { splits, seed })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Route matrix rows by patient key. Every key must belong to exactly one
/// side of the split.
pub fn partition(
    matrix: &FeatureMatrix,
    split: &SplitEntry,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (i, key) in matrix.patient_keys().iter().enumerate() {
        if split.train_patients.contains(key) {
            train_idx.push(i);
        } else if split.test_patients.contains(key) {
            test_idx.push(i);
        } else {
            return Err(Error::UnassignedPatient(key.clone()));
        }
    }
    Ok((matrix.subset(&train_idx), matrix.subset(&test_idx)))
}
