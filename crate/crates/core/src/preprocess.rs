//! Artifact trimming, automated trial rejection, and target encoding.
//!
//! Trimming removes the first 5 samples of every raw series (the stimulus
//! artifact window). Rejection drops trials with amplifier saturation or a
//! flat series. The target encoder replaces each categorical metadata value
//! with a smoothed mean of the training label within that category; it is
//! always fitted on training folds only and applying it never reads labels
//! from the cohort being transformed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    CcepRecord, CleanedCohort, EncodedCohort, EncodedRecord, RawCohort, RAW_SERIES_LEN,
    TRIMMED_SERIES_LEN,
};
use crate::error::{Error, Result};

/// Why a trial was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// At least 5 consecutive samples at or beyond the saturation threshold.
    Saturated,
    /// Series variance below the flatline epsilon.
    Flat,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Saturated => "saturated",
            RejectReason::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub row: usize,
    pub reason: RejectReason,
}

/// Drop the first 5 samples of every series (stimulus artifact window).
pub fn trim_artifact(cohort: RawCohort) -> Result<CleanedCohort> {
    let trimmed = cohort
        .records
        .into_iter()
        .map(|mut r| {
            r.series.drain(..RAW_SERIES_LEN - TRIMMED_SERIES_LEN);
            r
        })
        .collect();
    CleanedCohort::new(trimmed)
}

/// Remove trials with non-biological characteristics: amplifier saturation
/// (>= 5 consecutive samples at `|x| >= sat_threshold`) or a flatline
/// (variance < `flat_eps`). Returns survivors in input order plus the
/// rejected row indices with reasons.
pub fn reject_artifacts(
    cohort: &CleanedCohort,
    sat_threshold: f64,
    flat_eps: f64,
) -> (CleanedCohort, Vec<Rejection>) {
    let mut keep = Vec::with_capacity(cohort.len());
    let mut rejected = Vec::new();
    for (i, r) in cohort.records.iter().enumerate() {
        if is_saturated(&r.series, sat_threshold) {
            rejected.push(Rejection {
                row: i,
                reason: RejectReason::Saturated,
            });
        } else if variance(&r.series) < flat_eps {
            rejected.push(Rejection {
                row: i,
                reason: RejectReason::Flat,
            });
        } else {
            keep.push(r.clone());
        }
    }
    (CleanedCohort { records: keep }, rejected)
}

fn is_saturated(series: &[f64], threshold: f64) -> bool {
    let mut run = 0usize;
    for &v in series {
        if v.abs() >= threshold {
            run += 1;
            if run >= 5 {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

fn variance(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Default saturation threshold: 4x the 95th percentile of |sample| over the
/// whole cohort.
pub fn default_sat_threshold(cohort: &CleanedCohort) -> f64 {
    let mut mags: Vec<f64> = cohort
        .records
        .iter()
        .flat_map(|r| r.series.iter().map(|v| v.abs()))
        .collect();
    if mags.is_empty() {
        return f64::INFINITY;
    }
    let idx = ((mags.len() - 1) as f64 * 0.95).floor() as usize;
    let (_, p95, _) = mags.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
    4.0 * *p95
}

/// The six categorical metadata columns, in encoding order:
/// stim_electrode_id, rec_electrode_id, stim_region, rec_region,
/// tissue_type, hemisphere.
fn categorical_values(r: &CcepRecord) -> [&str; 6] {
    [
        &r.stim_electrode_id,
        &r.rec_electrode_id,
        &r.stim_region,
        &r.rec_region,
        r.tissue_type.as_str(),
        r.hemisphere.as_str(),
    ]
}

/// Smoothed-mean target encoder for the categorical metadata columns.
///
/// For a category `c` with `n` training rows of which `s` are positive,
/// `enc(c) = (s + m * p) / (n + m)` where `p` is the global training positive
/// rate. Categories unseen at fit time map to `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEncoder {
    tables: [BTreeMap<String, f64>; 6],
    global_prior: f64,
    smoothing_m: f64,
    fitted_on: String,
}

impl TargetEncoder {
    pub fn global_prior(&self) -> f64 {
        self.global_prior
    }

    pub fn smoothing_m(&self) -> f64 {
        self.smoothing_m
    }

    pub fn fitted_on(&self) -> &str {
        &self.fitted_on
    }

    /// Encoded value for a category of a given column (0..6), falling back
    /// to the global prior for unseen categories.
    pub fn encode(&self, column: usize, category: &str) -> f64 {
        self.tables[column]
            .get(category)
            .copied()
            .unwrap_or(self.global_prior)
    }
}

/// Fit a target encoder on a training cohort. `split_id` is recorded for
/// audit. Requires both classes in the training labels.
pub fn fit_encoder(train: &CleanedCohort, m: f64, split_id: &str) -> Result<TargetEncoder> {
    if train.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidConfig("smoothing m must be >= 0".into()));
    }
    let positives = train.records.iter().filter(|r| r.soz == 1).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::SingleClassTraining);
    }
    let p = positives as f64 / train.len() as f64;

    let mut counts: [BTreeMap<String, (f64, f64)>; 6] = Default::default();
    for r in &train.records {
        for (col, value) in categorical_values(r).into_iter().enumerate() {
            let e = counts[col].entry(value.to_string()).or_insert((0.0, 0.0));
            e.0 += 1.0;
            e.1 += f64::from(r.soz);
        }
    }
    let tables = counts.map(|table| {
        table
            .into_iter()
            .map(|(cat, (n, s))| (cat, (s + m * p) / (n + m)))
            .collect::<BTreeMap<String, f64>>()
    });
    Ok(TargetEncoder {
        tables,
        global_prior: p,
        smoothing_m: m,
        fitted_on: split_id.to_string(),
    })
}

/// Replace categorical metadata with encoded floats. Reads only the encoder
/// tables; labels of `cohort` do not influence the output.
pub fn apply_encoder(enc: &TargetEncoder, cohort: &CleanedCohort) -> Result<EncodedCohort> {
    let records = cohort
        .records
        .iter()
        .map(|r| {
            let cats = categorical_values(r);
            EncodedRecord {
                patient_id: r.patient_id.clone(),
                meta: [
                    enc.encode(0, cats[0]),
                    enc.encode(1, cats[1]),
                    r.stim_amplitude,
                    enc.encode(2, cats[2]),
                    enc.encode(3, cats[3]),
                    enc.encode(4, cats[4]),
                    enc.encode(5, cats[5]),
                ],
                series: r.series.clone(),
                soz: r.soz,
            }
        })
        .collect();
    EncodedCohort::new(records)
}
