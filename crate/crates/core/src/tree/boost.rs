//! Second-order gradient boosting over CART or oblivious trees, logistic
//! loss.
//!
//! Per round, with `p = sigmoid(F)`: gradient `g = p - y`, hessian
//! `h = p (1 - p)`, split gain
//! `0.5 (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) - gamma`, leaf weight
//! `-G/(H+l)`. The oblivious variant constrains every level of a tree to one
//! shared (feature, threshold) pair chosen by summed gain across that
//! level's nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{Classifier, ModelOutput};

use super::{
    check_two_classes, grow_grad_tree, leaf_weight, DecisionTree, Node, TrainingData,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostConfig {
    #[serde(default = "default_estimators")]
    pub n_estimators: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    /// L2 leaf regularizer.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Split gain penalty.
    #[serde(default)]
    pub gamma: f64,
    /// Constrain every tree level to one shared (feature, threshold).
    #[serde(default)]
    pub oblivious: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_estimators() -> usize {
    100
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_depth() -> usize {
    6
}
fn default_lambda() -> f64 {
    1.0
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_estimators: default_estimators(),
            learning_rate: default_learning_rate(),
            max_depth: default_depth(),
            lambda: default_lambda(),
            gamma: 0.0,
            oblivious: false,
            seed: 0,
        }
    }
}

impl BoostConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig("learning_rate must be in (0, 1]".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

pub struct GbdtModel {
    trees: Vec<DecisionTree>,
    base_score: f64,
    learning_rate: f64,
    n_cols: usize,
    /// Mean training logistic loss before any round, then after each round.
    loss_trace: Vec<f64>,
}

impl GbdtModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let mut f = self.base_score;
        for t in &self.trees {
            f += self.learning_rate * t.predict_value(row)[0];
        }
        f
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<[f64; 2]>> {
        if x.n_cols() != self.n_cols {
            return Err(Error::ColumnMismatch {
                expected: self.n_cols,
                found: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let p = sigmoid(self.raw_score(x.row(i)));
                [1.0 - p, p]
            })
            .collect())
    }
}

impl Classifier for GbdtModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        Ok(ModelOutput::Proba(self.predict_proba(x)?))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable logistic loss: softplus((1-2y) F).
fn logistic_loss(f: f64, y: u8) -> f64 {
    let margin = if y == 1 { -f } else { f };
    if margin > 30.0 {
        margin
    } else {
        margin.exp().ln_1p()
    }
}

/// Fit an additive logistic model `F_m = F_{m-1} + lr * tree_m` starting
/// from the prior log-odds. Fully deterministic: no row or feature sampling.
pub fn fit_gbdt(train: &FeatureMatrix, cfg: &BoostConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    check_two_classes(train.labels())?;
    let data = TrainingData::from_matrix(train);
    let labels = train.labels();
    let n = train.n_rows();

    let p = labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let mut f: Vec<f64> = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut loss_trace = Vec::with_capacity(cfg.n_estimators + 1);
    loss_trace.push(mean_loss(&f, labels));

    for round in 0..cfg.n_estimators {
        for i in 0..n {
            let pi = sigmoid(f[i]);
            grad[i] = pi - f64::from(labels[i]);
            hess[i] = pi * (1.0 - pi);
        }
        if grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { round });
        }
        let rows: Vec<u32> = (0..n as u32).collect();
        let tree = if cfg.oblivious {
            grow_oblivious_tree(&data, rows, &grad, &hess, cfg.lambda, cfg.gamma, cfg.max_depth)
        } else {
            grow_grad_tree(&data, rows, &grad, &hess, cfg.lambda, cfg.gamma, cfg.max_depth)
        };
        for i in 0..n {
            f[i] += cfg.learning_rate * tree.predict_value(train.row(i))[0];
        }
        loss_trace.push(mean_loss(&f, labels));
        trees.push(tree);
    }

    Ok(GbdtModel {
        trees,
        base_score,
        learning_rate: cfg.learning_rate,
        n_cols: train.n_cols(),
        loss_trace,
    })
}

fn mean_loss(f: &[f64], labels: &[u8]) -> f64 {
    f.iter()
        .zip(labels)
        .map(|(&fi, &y)| logistic_loss(fi, y))
        .sum::<f64>()
        / f.len() as f64
}

/// Level-wise oblivious tree: each level applies one (feature, threshold) to
/// every node, chosen by the sum of per-node gains. Empty children are kept
/// so the tree stays complete; empty leaves get weight 0.
fn grow_oblivious_tree(
    data: &TrainingData,
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
    gamma: f64,
    max_depth: usize,
) -> DecisionTree {
    let mut level_rows: Vec<Vec<u32>> = vec![rows];
    let mut level_splits: Vec<(usize, f64)> = Vec::new();

    for _ in 0..max_depth {
        let stats: Vec<(f64, f64)> = level_rows
            .iter()
            .map(|rs| {
                let g: f64 = rs.iter().map(|&r| grad[r as usize]).sum();
                let h: f64 = rs.iter().map(|&r| hess[r as usize]).sum();
                (g, h)
            })
            .collect();

        // summed gain across the level's nodes, per (feature, threshold)
        let score = |g: f64, h: f64| {
            let d = h + lambda;
            if d > 0.0 {
                g * g / d
            } else {
                0.0
            }
        };
        let candidates: Vec<Option<(f64, usize, usize)>> = (0..data.n_features())
            .into_par_iter()
            .map(|feat| {
                let bins = &data.bins[feat];
                let n_thr = bins.thresholds.len();
                if n_thr == 0 {
                    return None;
                }
                let mut total = vec![0.0f64; n_thr];
                // piecewise-constant contributions from small nodes land in a
                // difference array, folded in at the end
                let mut diff = vec![0.0f64; n_thr + 1];
                for (node, rs) in level_rows.iter().enumerate() {
                    if rs.is_empty() {
                        continue;
                    }
                    let (g_sum, h_sum) = stats[node];
                    let parent_score = score(g_sum, h_sum);
                    let gain_of = |gl: f64, hl: f64| {
                        0.5 * (score(gl, hl) + score(g_sum - gl, h_sum - hl) - parent_score) - gamma
                    };
                    if rs.len() * 4 >= n_thr + 1 {
                        let mut hist = vec![(0.0f64, 0.0f64); n_thr + 1];
                        for &r in rs {
                            let e = &mut hist[bins.codes[r as usize] as usize];
                            e.0 += grad[r as usize];
                            e.1 += hess[r as usize];
                        }
                        let (mut gl, mut hl) = (0.0, 0.0);
                        for (c, h) in hist.iter().enumerate().take(n_thr) {
                            gl += h.0;
                            hl += h.1;
                            total[c] += gain_of(gl, hl);
                        }
                    } else {
                        let mut coded: Vec<(u16, u32)> = rs
                            .iter()
                            .map(|&r| (bins.codes[r as usize], r))
                            .collect();
                        coded.sort_unstable_by_key(|&(c, _)| c);
                        let (mut gl, mut hl) = (0.0, 0.0);
                        let mut seg_start = 0usize; // gain_of(0,0) == -gamma over [0, first)
                        let mut seg_value = gain_of(0.0, 0.0);
                        let mut i = 0;
                        while i < coded.len() {
                            let code = coded[i].0 as usize;
                            if code > seg_start {
                                diff[seg_start] += seg_value;
                                diff[code] -= seg_value;
                            }
                            while i < coded.len() && coded[i].0 as usize == code {
                                let r = coded[i].1 as usize;
                                gl += grad[r];
                                hl += hess[r];
                                i += 1;
                            }
                            seg_start = code;
                            seg_value = gain_of(gl, hl);
                        }
                        if n_thr > seg_start {
                            diff[seg_start] += seg_value;
                            diff[n_thr] -= seg_value;
                        }
                    }
                }
                let mut best: Option<(f64, usize)> = None;
                let mut acc = 0.0;
                for (c, t) in total.iter().enumerate() {
                    acc += diff[c];
                    let gain = t + acc;
                    if gain > 0.0 && best.is_none_or(|(b, _)| gain > b) {
                        best = Some((gain, c));
                    }
                }
                best.map(|(gain, c)| (gain, feat, c))
            })
            .collect();

        let mut winner: Option<(f64, usize, usize)> = None;
        for cand in candidates.into_iter().flatten() {
            if winner.is_none_or(|(g, _, _)| cand.0 > g) {
                winner = Some(cand);
            }
        }
        let Some((_, feature, thr_idx)) = winner else {
            break;
        };
        let threshold = data.bins[feature].thresholds[thr_idx];
        level_splits.push((feature, threshold));

        let col = &data.columns[feature];
        let mut next = Vec::with_capacity(level_rows.len() * 2);
        for rs in &level_rows {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for &r in rs {
                if col[r as usize] < threshold {
                    left.push(r);
                } else {
                    right.push(r);
                }
            }
            next.push(left);
            next.push(right);
        }
        level_rows = next;
    }

    // materialize the complete tree; leaf i gathers level_rows[i]
    let depth = level_splits.len();
    let mut nodes = Vec::with_capacity((1 << (depth + 1)) - 1);
    build_complete(
        &mut nodes,
        &level_splits,
        0,
        0,
        &level_rows,
        grad,
        hess,
        lambda,
    );
    DecisionTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn build_complete(
    nodes: &mut Vec<Node>,
    level_splits: &[(usize, f64)],
    depth: usize,
    leaf_base: usize,
    leaves: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
) -> usize {
    let idx = nodes.len();
    if depth == level_splits.len() {
        let rs = &leaves[leaf_base];
        let g: f64 = rs.iter().map(|&r| grad[r as usize]).sum();
        let h: f64 = rs.iter().map(|&r| hess[r as usize]).sum();
        nodes.push(Node::Leaf {
            value: [leaf_weight(g, h, lambda), 0.0],
        });
        return idx;
    }
    let (feature, threshold) = level_splits[depth];
    nodes.push(Node::Leaf { value: [0.0, 0.0] }); // placeholder
    let width = 1 << (level_splits.len() - depth - 1);
    let left = build_complete(nodes, level_splits, depth + 1, leaf_base, leaves, grad, hess, lambda);
    let right = build_complete(
        nodes,
        level_splits,
        depth + 1,
        leaf_base + width,
        leaves,
        grad,
        hess,
        lambda,
    );
    nodes[idx] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    idx
}
