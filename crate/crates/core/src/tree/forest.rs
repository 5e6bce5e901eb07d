//! Random forest and extremely randomized trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{Classifier, ModelOutput};
use crate::seeding::{derive_seed, stream};

use super::{
    check_two_classes, grow_gini_tree, DecisionTree, FeaturePolicy, Node, TrainingData,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    #[serde(default = "default_estimators")]
    pub n_estimators: usize,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    /// Features sampled per split; `None` means `ceil(sqrt(d))`.
    #[serde(default)]
    pub mtry: Option<usize>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_estimators() -> usize {
    500
}
fn default_depth() -> usize {
    12
}
fn default_bootstrap() -> bool {
    true
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: default_estimators(),
            max_depth: default_depth(),
            mtry: None,
            bootstrap: default_bootstrap(),
            seed: 0,
        }
    }
}

pub struct ForestModel {
    trees: Vec<DecisionTree>,
    n_cols: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<[f64; 2]>> {
        if x.n_cols() != self.n_cols {
            return Err(Error::ColumnMismatch {
                expected: self.n_cols,
                found: x.n_cols(),
            });
        }
        let k = self.trees.len() as f64;
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mut acc = [0.0; 2];
                for t in &self.trees {
                    let v = t.predict_value(row);
                    acc[0] += v[0];
                    acc[1] += v[1];
                }
                [acc[0] / k, acc[1] / k]
            })
            .collect())
    }
}

impl Classifier for ForestModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        Ok(ModelOutput::Proba(self.predict_proba(x)?))
    }
}

/// Bagged CART forest: bootstrap row resamples, `mtry` feature subsampling
/// per split, prediction by averaging per-tree leaf class frequencies.
pub fn fit_random_forest(train: &FeatureMatrix, cfg: &ForestConfig) -> Result<ForestModel> {
    fit_forest(train, cfg, false)
}

/// Extremely randomized trees: no bootstrap, and each candidate feature gets
/// one uniformly random threshold between the node's min and max; the best
/// candidate by Gini decrease wins.
pub fn fit_extra_trees(train: &FeatureMatrix, cfg: &ForestConfig) -> Result<ForestModel> {
    fit_forest(train, cfg, true)
}

fn fit_forest(train: &FeatureMatrix, cfg: &ForestConfig, extra: bool) -> Result<ForestModel> {
    if cfg.n_estimators == 0 {
        return Err(Error::InvalidConfig("n_estimators must be >= 1".into()));
    }
    check_two_classes(train.labels())?;
    let data = TrainingData::from_matrix(train);
    let labels = train.labels();
    let n = train.n_rows();
    let mtry = cfg
        .mtry
        .unwrap_or_else(|| (train.n_cols() as f64).sqrt().ceil() as usize)
        .clamp(1, train.n_cols());

    let trees: Vec<DecisionTree> = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(derive_seed(cfg.seed, &[t as u64]), &[]);
            let rows: Vec<u32> = if cfg.bootstrap && !extra {
                (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            if extra {
                grow_extra_tree(&data, rows, labels, cfg.max_depth, mtry, &mut rng)
            } else {
                grow_gini_tree(
                    &data,
                    rows,
                    labels,
                    cfg.max_depth,
                    &FeaturePolicy::Subsample(mtry),
                    &mut rng,
                )
            }
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_cols: train.n_cols(),
    })
}

fn grow_extra_tree(
    data: &TrainingData,
    rows: Vec<u32>,
    labels: &[u8],
    max_depth: usize,
    mtry: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> DecisionTree {
    let mut nodes = Vec::new();
    grow_extra_node(data, rows, labels, max_depth, mtry, rng, &mut nodes);
    DecisionTree { nodes }
}

fn grow_extra_node(
    data: &TrainingData,
    rows: Vec<u32>,
    labels: &[u8],
    depth_left: usize,
    mtry: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let idx = nodes.len();
    nodes.push(super::class_leaf_node(&rows, labels));
    let n = rows.len() as f64;
    let n1 = rows.iter().filter(|&&r| labels[r as usize] == 1).count() as f64;
    if depth_left == 0 || rows.len() < 2 || n1 == 0.0 || n1 == n {
        return idx;
    }

    let d = data.n_features();
    let mut pool: Vec<usize> = (0..d).collect();
    let m = mtry.min(d);
    for i in 0..m {
        let j = rng.gen_range(i..d);
        pool.swap(i, j);
    }
    let mut picked = pool[..m].to_vec();
    picked.sort_unstable();

    let gini = |c0: f64, c1: f64| {
        let s = c0 + c1;
        if s == 0.0 {
            0.0
        } else {
            1.0 - (c0 * c0 + c1 * c1) / (s * s)
        }
    };
    let parent_gini = gini(n - n1, n1);

    // one random threshold per candidate feature, best Gini decrease wins
    let mut best: Option<(f64, usize, f64)> = None;
    for f in picked {
        let col = &data.columns[f];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &rows {
            let v = col[r as usize];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == hi {
            continue; // degenerate range, skip candidate
        }
        let thr = rng.gen_range(lo..hi);
        let thr = if thr > lo { thr } else { hi }; // guard against rounding onto lo
        let mut l = [0f64; 2];
        for &r in &rows {
            if col[r as usize] < thr {
                l[labels[r as usize] as usize] += 1.0;
            }
        }
        let nl = l[0] + l[1];
        if nl == 0.0 || nl == n {
            continue;
        }
        let decrease = parent_gini
            - (nl / n) * gini(l[0], l[1])
            - ((n - nl) / n) * gini(n - n1 - l[0], n1 - l[1]);
        if decrease > 0.0 && best.is_none_or(|(b, _, _)| decrease > b) {
            best = Some((decrease, f, thr));
        }
    }
    let Some((_, feature, threshold)) = best else {
        return idx;
    };

    let col = &data.columns[feature];
    let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
    for &r in &rows {
        if col[r as usize] < threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    drop(rows);
    let left = grow_extra_node(data, left_rows, labels, depth_left - 1, mtry, rng, nodes);
    let right = grow_extra_node(data, right_rows, labels, depth_left - 1, mtry, rng, nodes);
    nodes[idx] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::matrix_from_rows;

    fn separable(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = stream(seed, &[]);
        let rows: Vec<(Vec<f64>, u8)> = (0..n)
            .map(|_| {
                let y = rng.gen_range(0..2) as u8;
                let shift = if y == 1 { 3.0 } else { -3.0 };
                let x: Vec<f64> = (0..4)
                    .map(|c| rng.gen_range(-1.0..1.0) + if c == 1 { shift } else { 0.0 })
                    .collect();
                (x, y)
            })
            .collect();
        matrix_from_rows(&rows)
    }

    fn accuracy(model: &ForestModel, m: &FeatureMatrix) -> f64 {
        let proba = model.predict_proba(m).unwrap();
        let correct = proba
            .iter()
            .zip(m.labels())
            .filter(|(p, &y)| u8::from(p[1] > 0.5) == y)
            .count();
        correct as f64 / m.n_rows() as f64
    }

    #[test]
    fn one_deep_unbagged_tree_memorizes() {
        let mut rng = stream(2, &[]);
        let rows: Vec<(Vec<f64>, u8)> = (0..60)
            .map(|_| {
                (
                    (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                    rng.gen_range(0..2) as u8,
                )
            })
            .collect();
        let m = matrix_from_rows(&rows);
        let cfg = ForestConfig {
            n_estimators: 1,
            max_depth: usize::MAX,
            mtry: Some(3),
            bootstrap: false,
            seed: 0,
        };
        let model = fit_random_forest(&m, &cfg).unwrap();
        assert_eq!(accuracy(&model, &m), 1.0);
        let et = fit_extra_trees(&m, &cfg).unwrap();
        assert_eq!(accuracy(&et, &m), 1.0);
    }

    #[test]
    fn probabilities_sum_to_one_and_runs_are_deterministic() {
        let m = separable(120, 4);
        let cfg = ForestConfig {
            n_estimators: 15,
            max_depth: 6,
            mtry: None,
            bootstrap: true,
            seed: 9,
        };
        let a = fit_random_forest(&m, &cfg).unwrap().predict_proba(&m).unwrap();
        let b = fit_random_forest(&m, &cfg).unwrap().predict_proba(&m).unwrap();
        assert_eq!(a, b);
        for row in &a {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
            assert!(row[0] >= 0.0 && row[1] >= 0.0);
        }
    }

    #[test]
    fn extra_trees_two_seeds_differ_but_both_learn() {
        let m = separable(200, 7);
        let base = ForestConfig {
            n_estimators: 20,
            max_depth: 8,
            mtry: None,
            bootstrap: false,
            seed: 1,
        };
        let a = fit_extra_trees(&m, &base).unwrap();
        let b = fit_extra_trees(
            &m,
            &ForestConfig {
                seed: 2,
                ..base.clone()
            },
        )
        .unwrap();
        assert_ne!(a.trees()[0], b.trees()[0], "different seeds grew identical trees");
        assert!(accuracy(&a, &m) >= 0.9);
        assert!(accuracy(&b, &m) >= 0.9);
    }

    #[test]
    fn single_class_rejected() {
        let rows: Vec<(Vec<f64>, u8)> = (0..10).map(|i| (vec![i as f64], 1u8)).collect();
        let m = matrix_from_rows(&rows);
        assert!(matches!(
            fit_random_forest(&m, &ForestConfig::default()),
            Err(Error::SingleClass)
        ));
    }
}
