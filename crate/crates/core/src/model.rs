//! Common classifier interface.

use crate::dataset::FeatureMatrix;
use crate::error::Result;

/// What a fitted model emits for a batch of rows.
///
/// Probability models yield per-class probabilities; margin models (SVMs)
/// yield raw decision scores. Either form provides labels and a ranking
/// score for ROC AUC.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    /// One `[p_class0, p_class1]` row per input, rows summing to 1.
    Proba(Vec<[f64; 2]>),
    /// Raw decision scores; positive means class 1.
    Scores(Vec<f64>),
}

impl ModelOutput {
    /// Hard labels: probability threshold 0.5 on class 1, or the sign of the
    /// decision score. Ties go to class 0.
    pub fn labels(&self) -> Vec<u8> {
        match self {
            ModelOutput::Proba(p) => proba_labels(p),
            ModelOutput::Scores(s) => s.iter().map(|&v| u8::from(v > 0.0)).collect(),
        }
    }

    /// Ranking score per row (class-1 probability or raw decision score).
    pub fn scores(&self) -> Vec<f64> {
        match self {
            ModelOutput::Proba(p) => p.iter().map(|row| row[1]).collect(),
            ModelOutput::Scores(s) => s.clone(),
        }
    }

    /// The probability matrix, if this output carries one.
    pub fn proba(&self) -> Option<&Vec<[f64; 2]>> {
        match self {
            ModelOutput::Proba(p) => Some(p),
            ModelOutput::Scores(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ModelOutput::Proba(p) => p.len(),
            ModelOutput::Scores(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labels from a probability matrix: class 1 iff p1 > 0.5.
pub fn proba_labels(proba: &[[f64; 2]]) -> Vec<u8> {
    proba.iter().map(|row| u8::from(row[1] > 0.5)).collect()
}

/// A fitted classifier. Prediction is a pure function of the immutable
/// model, so models are safe to share across threads.
pub trait Classifier: Send + Sync {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput>;
}
