//! Seizure-onset-zone classification from cortico-cortical evoked
//! potentials.
//!
//! The crate covers the complete experiment: deterministic synthetic cohort
//! generation, artifact trimming and trial rejection, target encoding,
//! patient-grouped splitting, SMOTE oversampling, ten classifiers built from
//! first principles (KNN with banded dynamic time warping, random forest,
//! extremely randomized trees, two gradient-boosting variants, two kernel
//! SVMs trained by SMO, and a 1-D fully convolutional network in two input
//! variants), a soft-voting ensemble, and report generation.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `soz` binary for the `generate` / `run` / `report` CLI.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fcn;
pub mod knn;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod resample;
pub mod seeding;
pub mod splits;
pub mod svm;
pub mod synth;
pub mod tree;

pub use dataset::{CcepRecord, Cohort, FeatureMatrix, Stage};
pub use error::{Error, Result};
pub use metrics::{MetricTable, SplitResult};
pub use model::{Classifier, ModelOutput};
