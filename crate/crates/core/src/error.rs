//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

use crate::dataset::Stage;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // CSV ingestion / serialization
    #[error("missing or misplaced column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: non-finite or unparseable value in column `{col}`")]
    NonFiniteValue { row: usize, col: String },
    #[error("row {row}: invalid enum value in column `{col}`")]
    BadEnum { row: usize, col: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty cohort")]
    EmptyCohort,
    #[error("operation requires stage `{expected}`, cohort is `{found}`")]
    WrongStage { expected: Stage, found: Stage },
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // synthetic generation
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown electrode `{electrode}` for patient `{patient}`")]
    UnknownElectrode { patient: String, electrode: String },

    // preprocessing
    #[error("training labels contain a single class; target encoding needs both")]
    SingleClassTraining,

    // resampling / model fitting
    #[error("labels contain a single class")]
    SingleClass,
    #[error("minority class has {minority} rows; SMOTE needs more than k={k}")]
    MinorityTooSmall { minority: usize, k: usize },

    // splits
    #[error("requested {requested} splits but only {available} distinct partitions exist")]
    TooManySplitsRequested { requested: usize, available: usize },
    #[error("need at least {min} patients, got {got}")]
    TooFewPatients { min: usize, got: usize },
    #[error("patient `{0}` is not assigned to either side of the split")]
    UnassignedPatient(String),

    // KNN / DTW
    #[error("series lengths differ: {a} vs {b}")]
    SeriesLengthMismatch { a: usize, b: usize },
    #[error("band radius {radius} cannot connect series of lengths {a} and {b}")]
    BandTooNarrow { radius: usize, a: usize, b: usize },
    #[error("k={k} exceeds the {n} stored training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("feature count mismatch: model expects {expected}, input has {found}")]
    ColumnMismatch { expected: usize, found: usize },

    // trees / boosting
    #[error("empty training input")]
    EmptyInput,
    #[error("non-finite gradient at boosting round {round}")]
    NonFiniteGradient { round: usize },

    // SVM kernels
    #[error("kernel input dimensions differ: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },

    // FCN
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training loss diverged (non-finite) at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    // metrics / reporting
    #[error("vectors have different lengths: {a} vs {b}")]
    MetricLengthMismatch { a: usize, b: usize },
    #[error("models have uneven split counts")]
    UnevenSplits,

    // experiment orchestration: module errors with (stage, split, model) context
    #[error("stage `{stage}`{}{}: {source}",
        split.map(|s| format!(", split {s}")).unwrap_or_default(),
        model.as_deref().map(|m| format!(", model `{m}`")).unwrap_or_default())]
    Pipeline {
        stage: &'static str,
        split: Option<usize>,
        model: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach experiment context to an error bubbling out of a pipeline stage.
    pub fn in_stage(self, stage: &'static str, split: Option<usize>, model: Option<&str>) -> Self {
        Error::Pipeline {
            stage,
            split,
            model: model.map(str::to_owned),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad inputs or configuration (CLI exit code 1)
    /// as opposed to runtime failures (exit code 2).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::IoFailure { .. } | Error::DivergedLoss { .. } | Error::NonFiniteGradient { .. } => false,
            Error::Pipeline { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
