//! Experiment orchestration: configuration, pipeline wiring, artifacts.
//!
//! Pipeline order per split: patient-grouped partition of the cleaned
//! cohort, target-encoder fit on the training side only, encoding of both
//! sides, SMOTE on the training matrix only, then model training and
//! evaluation. Every RNG stream derives from `(seed, split, model)`, so runs
//! are deterministic regardless of thread count.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{FeatureMatrix, RawCohort, TRIMMED_SERIES_LEN};
use crate::error::{Error, Result};
use crate::fcn::{fcn_train, FcnConfig, FcnVariant};
use crate::knn::{knn_fit, DtwConfig};
use crate::metrics::{
    aggregate, confusion_metrics, results_to_csv, roc_auc, soft_ensemble, MetricTable, SplitResult,
};
use crate::model::{Classifier, ModelOutput};
use crate::preprocess::{
    apply_encoder, default_sat_threshold, fit_encoder, reject_artifacts, trim_artifact, Rejection,
};
use crate::resample::{smote, SmoteConfig};
use crate::seeding::{derive_seed, TAG_MODEL, TAG_SMOTE};
use crate::splits::{make_splits, SplitPlan};
use crate::svm::{svm_fit, KernelSpec, SvmConfig};
use crate::synth::{generate, GenConfig};
use crate::tree::{fit_extra_trees, fit_gbdt, fit_random_forest, BoostConfig, ForestConfig};

/// All ten model names, in canonical run order.
pub const ALL_MODELS: [&str; 10] = [
    "knn-dtw",
    "fcn-ts",
    "fcn-tsm",
    "svm-poly",
    "svm-rbf",
    "rf",
    "extra-trees",
    "gbdt-x",
    "gbdt-c",
    "soft-ensemble",
];

/// The soft ensemble's constituents.
pub const ENSEMBLE_MEMBERS: [&str; 4] = ["extra-trees", "rf", "gbdt-x", "gbdt-c"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Estimator counts as published: 500/500/1200/1000, 64-filter FCN for
    /// 20 epochs.
    Paper,
    /// Reduced counts for desk-scale runs: 100 trees and boosting rounds,
    /// an 8-filter FCN for 10 epochs on a 2,000-row subsample, and a
    /// 2,000-row KNN subsample.
    Desk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_smoothing_m")]
    pub smoothing_m: f64,
    #[serde(default = "default_smote_k")]
    pub smote_k: usize,
    #[serde(default = "default_n_splits")]
    pub n_splits: usize,
    /// Saturation threshold in microvolts; `None` means 4x the 95th
    /// percentile of |sample| over the cohort.
    #[serde(default)]
    pub sat_threshold: Option<f64>,
    #[serde(default = "default_flat_eps")]
    pub flat_eps: f64,
}

fn default_smoothing_m() -> f64 {
    20.0
}
fn default_smote_k() -> usize {
    5
}
fn default_n_splits() -> usize {
    7
}
fn default_flat_eps() -> f64 {
    1e-6
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            smoothing_m: default_smoothing_m(),
            smote_k: default_smote_k(),
            n_splits: default_n_splits(),
            sat_threshold: None,
            flat_eps: default_flat_eps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    /// Synthetic-cohort settings; required unless data is supplied.
    #[serde(default)]
    pub generator: Option<GenConfig>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// Models to run; defaults to all ten.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default)]
    pub knn: Option<DtwConfig>,
    #[serde(default)]
    pub rf: Option<ForestConfig>,
    #[serde(default)]
    pub extra_trees: Option<ForestConfig>,
    #[serde(default)]
    pub gbdt_x: Option<BoostConfig>,
    #[serde(default)]
    pub gbdt_c: Option<BoostConfig>,
    #[serde(default)]
    pub svm_poly: Option<SvmConfig>,
    #[serde(default)]
    pub svm_rbf: Option<SvmConfig>,
    /// Shared settings for both FCN variants.
    #[serde(default)]
    pub fcn: Option<FcnConfig>,
}

fn default_schema_version() -> u32 {
    1
}
fn default_profile() -> Profile {
    Profile::Desk
}
fn default_models() -> Vec<String> {
    ALL_MODELS.iter().map(|s| s.to_string()).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: default_schema_version(),
            seed: 0,
            profile: default_profile(),
            generator: None,
            pipeline: PipelineConfig::default(),
            models: default_models(),
            knn: None,
            rf: None,
            extra_trees: None,
            gbdt_x: None,
            gbdt_c: None,
            svm_poly: None,
            svm_rbf: None,
            fcn: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.pipeline.n_splits < 2 {
            return Err(Error::InvalidConfig("n_splits must be >= 2".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("models list is empty".into()));
        }
        for m in &self.models {
            if !ALL_MODELS.contains(&m.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown model `{m}`; valid names: {}",
                    ALL_MODELS.join(", ")
                )));
            }
        }
        if self.models.iter().any(|m| m == "soft-ensemble") {
            for member in ENSEMBLE_MEMBERS {
                if !self.models.iter().any(|m| m == member) {
                    return Err(Error::InvalidConfig(format!(
                        "soft-ensemble requires `{member}` in the models list"
                    )));
                }
            }
        }
        Ok(())
    }

    fn knn_config(&self) -> DtwConfig {
        self.knn.clone().unwrap_or_else(|| DtwConfig {
            train_subsample: match self.profile {
                Profile::Paper => None,
                Profile::Desk => Some(2000),
            },
            ..DtwConfig::default()
        })
    }

    fn forest_config(&self, extra: bool) -> ForestConfig {
        let block = if extra { &self.extra_trees } else { &self.rf };
        block.clone().unwrap_or_else(|| ForestConfig {
            n_estimators: match self.profile {
                Profile::Paper => 500,
                Profile::Desk => 100,
            },
            bootstrap: !extra,
            ..ForestConfig::default()
        })
    }

    fn boost_config(&self, oblivious: bool) -> BoostConfig {
        let block = if oblivious { &self.gbdt_c } else { &self.gbdt_x };
        block.clone().unwrap_or_else(|| BoostConfig {
            n_estimators: match (self.profile, oblivious) {
                (Profile::Paper, false) => 1200,
                (Profile::Paper, true) => 1000,
                (Profile::Desk, _) => 100,
            },
            max_depth: match self.profile {
                Profile::Paper => 6,
                Profile::Desk => 5,
            },
            oblivious,
            ..BoostConfig::default()
        })
    }

    fn svm_config(&self, poly: bool) -> SvmConfig {
        let block = if poly { &self.svm_poly } else { &self.svm_rbf };
        block.clone().unwrap_or_else(|| SvmConfig {
            kernel: if poly {
                KernelSpec::Poly {
                    degree: 5,
                    gamma: None,
                    coef0: 1.0,
                }
            } else {
                KernelSpec::Rbf { gamma: None }
            },
            max_passes: match self.profile {
                Profile::Paper => 1000,
                Profile::Desk => 30,
            },
            ..SvmConfig::default()
        })
    }

    fn fcn_config(&self, variant: FcnVariant) -> FcnConfig {
        let mut cfg = self.fcn.clone().unwrap_or_else(|| match self.profile {
            Profile::Paper => FcnConfig::default(),
            Profile::Desk => FcnConfig {
                filters: 8,
                epochs: 10,
                batch_size: 64,
                lr: 3e-3,
                train_subsample: Some(2000),
                ..FcnConfig::default()
            },
        });
        cfg.variant = variant;
        cfg
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub crate_version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub n_raw_records: usize,
    pub n_rejected: usize,
    pub n_splits: usize,
    pub models: Vec<String>,
    pub thread_cap: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub table: MetricTable,
    pub results: Vec<SplitResult>,
    pub split_plan: SplitPlan,
    pub rejections: Vec<Rejection>,
    pub manifest: RunManifest,
}

fn model_tag(name: &str) -> u64 {
    // FNV-1a over the model name, stable across runs
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Execute the full pipeline and optionally write artifacts
/// (`results.csv`, `table1.md`, `table1.csv`, `splits.json`,
/// `rejections.csv`, `manifest.json`) to `out_dir`.
pub fn run_experiment(
    cfg: &RunConfig,
    data: Option<RawCohort>,
    out_dir: Option<&Path>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let raw = match data {
        Some(c) => c,
        None => {
            let gen_cfg = cfg.generator.clone().ok_or_else(|| {
                Error::InvalidConfig("no input data and no generator block".into())
            })?;
            let t = Instant::now();
            let cohort = generate(&gen_cfg).map_err(|e| e.in_stage("generate", None, None))?;
            log::info!(
                "stage=generate records={} elapsed_ms={}",
                cohort.len(),
                t.elapsed().as_millis()
            );
            cohort
        }
    };
    let n_raw_records = raw.len();

    let cleaned = trim_artifact(raw).map_err(|e| e.in_stage("trim", None, None))?;
    let sat = cfg
        .pipeline
        .sat_threshold
        .unwrap_or_else(|| default_sat_threshold(&cleaned));
    let (kept, rejections) = reject_artifacts(&cleaned, sat, cfg.pipeline.flat_eps);
    log::info!(
        "stage=reject kept={} rejected={} sat_threshold={sat}",
        kept.len(),
        rejections.len()
    );
    if kept.is_empty() {
        return Err(Error::EmptyCohort.in_stage("reject", None, None));
    }

    let patients = kept.patients();
    let plan = make_splits(&patients, cfg.pipeline.n_splits, cfg.seed)
        .map_err(|e| e.in_stage("splits", None, None))?;

    let mut results: Vec<SplitResult> = Vec::new();
    let run_names: Vec<&str> = ALL_MODELS
        .iter()
        .copied()
        .filter(|n| cfg.models.iter().any(|m| m == n))
        .collect();

    for (s, entry) in plan.splits.iter().enumerate() {
        // leakage guard, asserted on every run
        assert!(
            entry.train_patients.is_disjoint(&entry.test_patients),
            "split {s} leaks patients"
        );
        let union: BTreeSet<String> = entry
            .train_patients
            .union(&entry.test_patients)
            .cloned()
            .collect();
        assert_eq!(union, patients, "split {s} does not cover the cohort");

        let t_split = Instant::now();
        let train_cohort = kept.filter_patients(&entry.train_patients);
        let test_cohort = kept.filter_patients(&entry.test_patients);

        let encoder = fit_encoder(&train_cohort, cfg.pipeline.smoothing_m, &format!("split-{s}"))
            .map_err(|e| e.in_stage("encode", Some(s), None))?;
        let train_enc = apply_encoder(&encoder, &train_cohort)
            .map_err(|e| e.in_stage("encode", Some(s), None))?;
        let test_enc = apply_encoder(&encoder, &test_cohort)
            .map_err(|e| e.in_stage("encode", Some(s), None))?;
        let train_matrix = train_enc.to_matrix(true);
        let test_matrix = test_enc.to_matrix(true);

        let smote_cfg = SmoteConfig {
            k_neighbors: cfg.pipeline.smote_k,
            seed: derive_seed(cfg.seed, &[TAG_SMOTE, s as u64]),
        };
        let train_bal = smote(&train_matrix, &smote_cfg)
            .map_err(|e| e.in_stage("oversample", Some(s), None))?;
        log::info!(
            "stage=prepare split={s} train={} oversampled={} test={} elapsed_ms={}",
            train_matrix.n_rows(),
            train_bal.n_rows(),
            test_matrix.n_rows(),
            t_split.elapsed().as_millis()
        );

        // series-only views for the TS variant, built once per split
        let needs_ts = run_names.contains(&"fcn-ts");
        let train_bal_ts = needs_ts.then(|| train_bal.prefix_columns(TRIMMED_SERIES_LEN));
        let test_ts = needs_ts.then(|| test_matrix.prefix_columns(TRIMMED_SERIES_LEN));

        let mut member_probas: Vec<(usize, Vec<[f64; 2]>)> = Vec::new();
        for &name in &run_names {
            if name == "soft-ensemble" {
                continue;
            }
            let t_model = Instant::now();
            let seed = derive_seed(cfg.seed, &[TAG_MODEL, s as u64, model_tag(name)]);
            let (train_x, test_x) = if name == "fcn-ts" {
                (train_bal_ts.as_ref().unwrap(), test_ts.as_ref().unwrap())
            } else {
                (&train_bal, &test_matrix)
            };
            let output = fit_predict(cfg, name, seed, train_x, test_x)
                .map_err(|e| e.in_stage("train", Some(s), Some(name)))?;
            if let (Some(pos), Some(proba)) = (
                ENSEMBLE_MEMBERS.iter().position(|&m| m == name),
                output.proba(),
            ) {
                member_probas.push((pos, proba.clone()));
            }
            results.push(score_output(name, s, test_x.labels(), &output)?);
            log::info!(
                "stage=model split={s} model={name} elapsed_ms={}",
                t_model.elapsed().as_millis()
            );
        }

        if run_names.contains(&"soft-ensemble") {
            member_probas.sort_by_key(|(pos, _)| *pos);
            let probas: Vec<Vec<[f64; 2]>> =
                member_probas.into_iter().map(|(_, p)| p).collect();
            let ens = soft_ensemble(&probas)
                .map_err(|e| e.in_stage("ensemble", Some(s), Some("soft-ensemble")))?;
            results.push(score_output(
                "soft-ensemble",
                s,
                test_matrix.labels(),
                &ModelOutput::Proba(ens),
            )?);
        }
    }

    let table = aggregate(&results).map_err(|e| e.in_stage("aggregate", None, None))?;

    let manifest = RunManifest {
        schema_version: cfg.schema_version,
        crate_version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(cfg),
        seed: cfg.seed,
        n_raw_records,
        n_rejected: rejections.len(),
        n_splits: cfg.pipeline.n_splits,
        models: run_names.iter().map(|s| s.to_string()).collect(),
        thread_cap: std::env::var("SOZ_THREADS")
            .ok()
            .and_then(|v| v.parse().ok()),
    };

    if let Some(dir) = out_dir {
        write_artifacts(dir, &results, &table, &plan, &rejections, &manifest)?;
    }

    Ok(RunOutput {
        table,
        results,
        split_plan: plan,
        rejections,
        manifest,
    })
}

fn fit_predict(
    cfg: &RunConfig,
    name: &str,
    seed: u64,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<ModelOutput> {
    match name {
        "knn-dtw" => {
            let mut c = cfg.knn_config();
            c.seed = seed;
            knn_fit(train, &c)?.predict(test)
        }
        "fcn-ts" | "fcn-tsm" => {
            let variant = if name == "fcn-ts" {
                FcnVariant::Ts
            } else {
                FcnVariant::Tsm
            };
            if train.n_cols() != variant.input_len() {
                return Err(Error::ShapeMismatch(format!(
                    "{name} expects {} columns, got {}",
                    variant.input_len(),
                    train.n_cols()
                )));
            }
            let mut c = cfg.fcn_config(variant);
            c.seed = seed;
            fcn_train(train, &c)?.predict(test)
        }
        "svm-poly" | "svm-rbf" => {
            let mut c = cfg.svm_config(name == "svm-poly");
            c.seed = seed;
            svm_fit(train, &c)?.predict(test)
        }
        "rf" => {
            let mut c = cfg.forest_config(false);
            c.seed = seed;
            c.bootstrap = true;
            fit_random_forest(train, &c)?.predict(test)
        }
        "extra-trees" => {
            let mut c = cfg.forest_config(true);
            c.seed = seed;
            c.bootstrap = false;
            fit_extra_trees(train, &c)?.predict(test)
        }
        "gbdt-x" => {
            let mut c = cfg.boost_config(false);
            c.seed = seed;
            c.oblivious = false;
            fit_gbdt(train, &c)?.predict(test)
        }
        "gbdt-c" => {
            let mut c = cfg.boost_config(true);
            c.seed = seed;
            c.oblivious = true;
            fit_gbdt(train, &c)?.predict(test)
        }
        other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
    }
}

fn score_output(
    name: &str,
    split: usize,
    y_true: &[u8],
    output: &ModelOutput,
) -> Result<SplitResult> {
    let labels = output.labels();
    let (macro_precision, macro_recall, accuracy) = confusion_metrics(y_true, &labels)?;
    let auc = roc_auc(y_true, &output.scores())?;
    Ok(SplitResult {
        model: name.to_string(),
        split,
        macro_precision,
        macro_recall,
        roc_auc: auc,
        accuracy,
    })
}

fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_artifacts(
    dir: &Path,
    results: &[SplitResult],
    table: &MetricTable,
    plan: &SplitPlan,
    rejections: &[Rejection],
    manifest: &RunManifest,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::IoFailure {
        path: dir.to_owned(),
        source,
    })?;
    let write = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|source| Error::IoFailure { path, source })
    };
    write("results.csv", results_to_csv(results))?;
    write("table1.md", table.to_markdown())?;
    write("table1.csv", table.to_csv())?;
    write(
        "splits.json",
        serde_json::to_string_pretty(plan).expect("plan serializes") + "\n",
    )?;
    let mut rej = String::from("row_index,reason\n");
    for r in rejections {
        rej.push_str(&format!("{},{}\n", r.row, r.reason.as_str()));
    }
    write("rejections.csv", rej)?;
    write(
        "manifest.json",
        serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(())
}

/// Apply the `SOZ_THREADS` cap to the global worker pool. Call once at
/// process start; later calls are no-ops.
pub fn init_thread_pool_from_env() {
    if let Ok(v) = std::env::var("SOZ_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
