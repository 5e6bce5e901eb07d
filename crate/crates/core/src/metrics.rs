//! Metrics, soft-voting ensemble, per-split aggregation, and report
//! rendering.
//!
//! ROC AUC is computed from rank statistics with average ranks for ties,
//! which equals pairwise counting with half credit for tied pairs. Macro
//! precision/recall are unweighted means over the two classes with the
//! 0/0 -> 0 convention.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-model, per-split metric values, all in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub model: String,
    pub split: usize,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub roc_auc: f64,
    pub accuracy: f64,
}

/// (macro precision, macro recall, accuracy) from binary label vectors.
pub fn confusion_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<(f64, f64, f64)> {
    if y_true.len() != y_pred.len() {
        return Err(Error::MetricLengthMismatch {
            a: y_true.len(),
            b: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = [[0usize; 2]; 2]; // counts[truth][pred]
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[t as usize][p as usize] += 1;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for c in 0..2 {
        let tp = counts[c][c];
        let fp = counts[1 - c][c];
        let fn_ = counts[c][1 - c];
        precision_sum += ratio(tp, tp + fp);
        recall_sum += ratio(tp, tp + fn_);
    }
    let correct = counts[0][0] + counts[1][1];
    Ok((
        precision_sum / 2.0,
        recall_sum / 2.0,
        correct as f64 / y_true.len() as f64,
    ))
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half. Rank-based (average ranks for ties).
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::MetricLengthMismatch {
            a: y_true.len(),
            b: scores.len(),
        });
    }
    let n_pos = y_true.iter().filter(|&&t| t == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Sum of average ranks (1-based) over positives, walking tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        let pos_in_group = order[i..j].iter().filter(|&&k| y_true[k] == 1).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Element-wise mean of probability matrices (soft voting). Predicted label
/// is the argmax with ties going to class 0.
pub fn soft_ensemble(probas: &[Vec<[f64; 2]>]) -> Result<Vec<[f64; 2]>> {
    let first = probas.first().ok_or(Error::EmptyInput)?;
    let n = first.len();
    if probas.iter().any(|p| p.len() != n) {
        return Err(Error::ShapeMismatch("probability matrices differ in length".into()));
    }
    let k = probas.len() as f64;
    let mut out = vec![[0.0; 2]; n];
    for p in probas {
        for (acc, row) in out.iter_mut().zip(p) {
            acc[0] += row[0] / k;
            acc[1] += row[1] / k;
        }
    }
    Ok(out)
}

/// Mean and sample standard deviation of one metric over splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub roc_auc: MeanStd,
    pub accuracy: MeanStd,
}

/// Aggregated per-model table mirroring the report layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<ModelMetrics>,
    pub n_splits: usize,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// Aggregate split results into mean +/- sample standard deviation per
/// (model, metric). Models keep first-appearance order; every model must
/// contribute the same number of splits (>= 2).
pub fn aggregate(results: &[SplitResult]) -> Result<MetricTable> {
    if results.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<&SplitResult>> = BTreeMap::new();
    for r in results {
        if !grouped.contains_key(r.model.as_str()) {
            order.push(&r.model);
        }
        grouped.entry(&r.model).or_default().push(r);
    }
    let n_splits = grouped[order[0]].len();
    if n_splits < 2 || grouped.values().any(|v| v.len() != n_splits) {
        return Err(Error::UnevenSplits);
    }
    let rows = order
        .iter()
        .map(|model| {
            let rs = &grouped[model];
            let collect = |f: fn(&SplitResult) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            ModelMetrics {
                model: model.to_string(),
                macro_precision: mean_std(&collect(|r| r.macro_precision)),
                macro_recall: mean_std(&collect(|r| r.macro_recall)),
                roc_auc: mean_std(&collect(|r| r.roc_auc)),
                accuracy: mean_std(&collect(|r| r.accuracy)),
            }
        })
        .collect();
    Ok(MetricTable { rows, n_splits })
}

/// Format one aggregated cell on a 0-100 scale: `mm.m ±s.ss`.
pub fn format_cell(m: MeanStd) -> String {
    format!("{:.1} ±{:.2}", m.mean * 100.0, m.std * 100.0)
}

/// Parse a `mm.m ±s.ss` cell back to (mean, std) on the 0-1 scale.
pub fn parse_cell(cell: &str) -> Option<MeanStd> {
    let (mean, std) = cell.trim().split_once("±")?;
    Some(MeanStd {
        mean: mean.trim().parse::<f64>().ok()? / 100.0,
        std: std.trim().parse::<f64>().ok()? / 100.0,
    })
}

impl MetricTable {
    /// Markdown table with the four metric columns.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| Model | Macro Precision | Macro Recall | ROC AUC | Accuracy |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                r.model,
                format_cell(r.macro_precision),
                format_cell(r.macro_recall),
                format_cell(r.roc_auc),
                format_cell(r.accuracy),
            );
        }
        s
    }

    /// Wide CSV with full-precision means and standard deviations.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "model,macro_precision_mean,macro_precision_std,macro_recall_mean,macro_recall_std,roc_auc_mean,roc_auc_std,accuracy_mean,accuracy_std\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.model,
                r.macro_precision.mean,
                r.macro_precision.std,
                r.macro_recall.mean,
                r.macro_recall.std,
                r.roc_auc.mean,
                r.roc_auc.std,
                r.accuracy.mean,
                r.accuracy.std,
            );
        }
        s
    }

    pub fn get(&self, model: &str) -> Option<&ModelMetrics> {
        self.rows.iter().find(|r| r.model == model)
    }
}

/// Long-form results CSV: model,split,metric,value.
pub fn results_to_csv(results: &[SplitResult]) -> String {
    let mut s = String::from("model,split,metric,value\n");
    for r in results {
        let _ = writeln!(s, "{},{},macro_precision,{}", r.model, r.split, r.macro_precision);
        let _ = writeln!(s, "{},{},macro_recall,{}", r.model, r.split, r.macro_recall);
        let _ = writeln!(s, "{},{},roc_auc,{}", r.model, r.split, r.roc_auc);
        let _ = writeln!(s, "{},{},accuracy,{}", r.model, r.split, r.accuracy);
    }
    s
}

/// Parse a long-form results CSV back into split results.
pub fn results_from_csv(text: &str) -> Result<Vec<SplitResult>> {
    let mut partial: BTreeMap<(String, usize), BTreeMap<String, f64>> = BTreeMap::new();
    let mut order: Vec<(String, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "model,split,metric,value" {
                return Err(Error::MissingColumn("model,split,metric,value".into()));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::RowWidthMismatch {
                row: i - 1,
                expected: 4,
                found: fields.len(),
            });
        }
        let split: usize = fields[1].parse().map_err(|_| Error::NonFiniteValue {
            row: i - 1,
            col: "split".into(),
        })?;
        let value: f64 = fields[3].parse().map_err(|_| Error::NonFiniteValue {
            row: i - 1,
            col: "value".into(),
        })?;
        let key = (fields[0].to_string(), split);
        if !partial.contains_key(&key) {
            order.push(key.clone());
        }
        partial.entry(key).or_default().insert(fields[2].to_string(), value);
    }
    order
        .into_iter()
        .map(|key| {
            let m = &partial[&key];
            let get = |name: &str| {
                m.get(name).copied().ok_or(Error::MissingColumn(name.to_string()))
            };
            Ok(SplitResult {
                model: key.0.clone(),
                split: key.1,
                macro_precision: get("macro_precision")?,
                macro_recall: get("macro_recall")?,
                roc_auc: get("roc_auc")?,
                accuracy: get("accuracy")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions_score_one() {
        let y = [1, 0, 1, 0, 1];
        let (p, r, a) = confusion_metrics(&y, &y).unwrap();
        assert_eq!((p, r, a), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counted_confusion() {
        // tp1=1 fp1=0 fn1=1; tp0=2 fp0=1 fn0=0
        let (p, r, a) = confusion_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert!((p - 5.0 / 6.0).abs() < 1e-15);
        assert!((r - 0.75).abs() < 1e-15);
        assert!((a - 0.75).abs() < 1e-15);
    }

    #[test]
    fn all_negative_predictions_use_zero_convention() {
        let (p, _, _) = confusion_metrics(&[1, 0, 1], &[0, 0, 0]).unwrap();
        // precision_1 = 0/0 -> 0, precision_0 = 1/3... macro = (1/3 + 0)/2
        assert!((p - (1.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn auc_hand_counted_pairs() {
        let auc = roc_auc(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1]).unwrap();
        assert!((auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn auc_edges() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.5, 0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert!(matches!(
            roc_auc(&[1, 1], &[0.1, 0.2]),
            Err(Error::SingleClass)
        ));
    }

    /// Brute-force pair counting oracle.
    fn auc_brute(y: &[u8], s: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_matches_pair_counting_with_ties() {
        use rand::Rng;
        let mut rng = crate::seeding::stream(7, &[1]);
        for _ in 0..200 {
            let n = rng.gen_range(2..30);
            let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            if y.iter().all(|&v| v == 0) || y.iter().all(|&v| v == 1) {
                continue;
            }
            // Coarse grid of scores to force plenty of ties.
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let fast = roc_auc(&y, &s).unwrap();
            let slow = auc_brute(&y, &s);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn soft_ensemble_mean_and_ties() {
        let a = vec![[1.0, 0.0], [0.2, 0.8]];
        let same = soft_ensemble(&[a.clone(), a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(same, a);
        let mixed = soft_ensemble(&[
            vec![[1.0, 0.0]],
            vec![[1.0, 0.0]],
            vec![[0.0, 1.0]],
            vec![[0.0, 1.0]],
        ])
        .unwrap();
        assert_eq!(mixed, vec![[0.5, 0.5]]);
        // tie -> class 0
        assert_eq!(crate::model::proba_labels(&mixed), vec![0]);
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let results: Vec<SplitResult> = [(0, 0.80), (1, 0.90)]
            .iter()
            .map(|&(split, v)| SplitResult {
                model: "m".into(),
                split,
                macro_precision: v,
                macro_recall: v,
                roc_auc: v,
                accuracy: 0.5,
            })
            .collect();
        let table = aggregate(&results).unwrap();
        let row = table.get("m").unwrap();
        assert!((row.roc_auc.mean - 0.85).abs() < 1e-12);
        // sample std of {80, 90} on the percent scale = 7.07
        assert!((row.roc_auc.std * 100.0 - 7.0710678).abs() < 1e-4);
        assert_eq!(format_cell(row.roc_auc), "85.0 ±7.07");
        assert_eq!(row.accuracy.std, 0.0);
    }

    #[test]
    fn uneven_splits_rejected() {
        let mk = |model: &str, split: usize| SplitResult {
            model: model.into(),
            split,
            macro_precision: 0.5,
            macro_recall: 0.5,
            roc_auc: 0.5,
            accuracy: 0.5,
        };
        assert!(matches!(
            aggregate(&[mk("a", 0), mk("a", 1), mk("b", 0)]),
            Err(Error::UnevenSplits)
        ));
        assert!(matches!(aggregate(&[mk("a", 0)]), Err(Error::UnevenSplits)));
    }

    #[test]
    fn rendered_row_parses_back() {
        let line = "| Soft Ensemble | 68.2 ±1.56 | 76.3 ±1.83 | 83.2 ±1.99 | 87.7 ±1.79 |";
        let cells: Vec<MeanStd> = line
            .trim_matches('|')
            .split('|')
            .skip(1)
            .map(|c| parse_cell(c).unwrap())
            .collect();
        assert_eq!(cells.len(), 4);
        assert!((cells[0].mean - 0.682).abs() < 1e-12);
        assert!((cells[0].std - 0.0156).abs() < 1e-12);
        assert!((cells[2].mean - 0.832).abs() < 1e-12);
        assert!((cells[3].std - 0.0179).abs() < 1e-12);
    }

    #[test]
    fn results_csv_round_trip() {
        let results = vec![
            SplitResult {
                model: "rf".into(),
                split: 0,
                macro_precision: 0.61,
                macro_recall: 0.72,
                roc_auc: 0.83,
                accuracy: 0.94,
            },
            SplitResult {
                model: "rf".into(),
                split: 1,
                macro_precision: 0.6100000000000001,
                macro_recall: 0.7,
                roc_auc: 0.8,
                accuracy: 0.9,
            },
        ];
        let csv = results_to_csv(&results);
        let parsed = results_from_csv(&csv).unwrap();
        assert_eq!(parsed, results);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // auc(y, s) + auc(y, -s) = 1 for tie-free scores, and auc is
        // invariant under strictly increasing transforms.
        #[test]
        fn auc_symmetry_and_monotone_invariance(seed in 0u64..10_000) {
            use rand::Rng;
            let mut rng = crate::seeding::stream(seed, &[2]);
            let n = rng.gen_range(4..40);
            let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
            let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            // de-duplicate to guarantee tie-free
            s.iter_mut().enumerate().for_each(|(i, v)| *v += i as f64 * 1e-9);
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let auc = roc_auc(&y, &s).unwrap();
            prop_assert!((auc + roc_auc(&y, &neg).unwrap() - 1.0).abs() < 1e-12);
            let warped: Vec<f64> = s.iter().map(|v| (v * 0.3).exp() + 7.0).collect();
            prop_assert!((auc - roc_auc(&y, &warped).unwrap()).abs() < 1e-12);
        }
    }
}
