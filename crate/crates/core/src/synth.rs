//! Deterministic synthetic CCEP cohort generator.
//!
//! Substitutes for clinical recordings: every ordered (stimulating,
//! recording) electrode pair of every patient yields one trial. Responses are
//! a stimulus-artifact transient in the first 5 samples, two damped sinusoids
//! (an early fast component and a late slow one), and white noise. Electrodes
//! inside the seizure onset zone get their response scaled by `soz_amp_gain`
//! and their trials' stimulation amplitude shifted by `soz_meta_shift`, so
//! both the series and the metadata can carry label signal. Setting the gain
//! to 1 and the shift to 0 produces label-free data.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CcepRecord, Cohort, Hemisphere, RawCohort, Tissue, RAW_SERIES_LEN};
use crate::error::{Error, Result};
use crate::seeding::{stream, TAG_PATIENT};

/// Samples per second; one sample per millisecond.
pub const SAMPLING_RATE_HZ: f64 = 1000.0;

/// Number of leading samples occupied by the stimulus artifact.
pub const ARTIFACT_SAMPLES: usize = 5;

const REGION_POOL: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    #[serde(default = "default_n_patients")]
    pub n_patients: usize,
    /// Inclusive range of electrodes implanted per patient.
    #[serde(default = "default_electrode_range")]
    pub electrodes_per_patient_range: (usize, usize),
    /// Fraction of each patient's electrodes inside the SOZ.
    #[serde(default = "default_soz_fraction")]
    pub soz_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// White-noise standard deviation, microvolts.
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Response amplitude multiplier for SOZ electrodes (>= 1).
    #[serde(default = "default_soz_amp_gain")]
    pub soz_amp_gain: f64,
    /// Additive stimulation-amplitude shift for SOZ electrodes' trials.
    #[serde(default = "default_soz_meta_shift")]
    pub soz_meta_shift: f64,
}

fn default_n_patients() -> usize {
    7
}
fn default_electrode_range() -> (usize, usize) {
    (50, 90)
}
fn default_soz_fraction() -> f64 {
    0.08
}
fn default_noise_sd() -> f64 {
    3.0
}
fn default_soz_amp_gain() -> f64 {
    1.25
}
fn default_soz_meta_shift() -> f64 {
    1.5
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_patients: default_n_patients(),
            electrodes_per_patient_range: default_electrode_range(),
            soz_fraction: default_soz_fraction(),
            seed: 0,
            noise_sd: default_noise_sd(),
            soz_amp_gain: default_soz_amp_gain(),
            soz_meta_shift: default_soz_meta_shift(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.electrodes_per_patient_range;
        if self.n_patients == 0 {
            return Err(Error::InvalidConfig("n_patients must be >= 1".into()));
        }
        if lo < 2 || hi > 512 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "electrodes_per_patient_range [{lo}, {hi}] must lie within [2, 512] with low <= high"
            )));
        }
        if !(self.soz_fraction > 0.0 && self.soz_fraction <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "soz_fraction {} outside (0, 0.5]",
                self.soz_fraction
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig("noise_sd must be positive".into()));
        }
        if !(self.soz_amp_gain >= 1.0 && self.soz_amp_gain.is_finite()) {
            return Err(Error::InvalidConfig("soz_amp_gain must be >= 1".into()));
        }
        if !self.soz_meta_shift.is_finite() {
            return Err(Error::InvalidConfig("soz_meta_shift must be finite".into()));
        }
        Ok(())
    }
}

/// Per-electrode response morphology, drawn once per electrode.
struct ElectrodeProfile {
    id: String,
    region: String,
    tissue: Tissue,
    hemisphere: Hemisphere,
    soz: bool,
    base_amp: f64,
    n1_amp: f64,
    n1_lat: f64,
    n1_tau: f64,
    n1_freq: f64,
    n2_amp: f64,
    n2_lat: f64,
    n2_tau: f64,
    n2_freq: f64,
}

/// Generate a raw cohort. Pure function of the config: the same config
/// (including seed) always yields the identical cohort, regardless of thread
/// count. Output order is (patient, stim electrode, rec electrode).
pub fn generate(cfg: &GenConfig) -> Result<RawCohort> {
    cfg.validate()?;
    let per_patient: Vec<Vec<CcepRecord>> = (0..cfg.n_patients)
        .into_par_iter()
        .map(|p| generate_patient(cfg, p))
        .collect();
    RawCohort::new(per_patient.into_iter().flatten().collect())
}

fn generate_patient(cfg: &GenConfig, patient_idx: usize) -> Vec<CcepRecord> {
    let mut rng = stream(cfg.seed, &[TAG_PATIENT, patient_idx as u64]);
    let pid = format!("P{patient_idx:02}");
    let (lo, hi) = cfg.electrodes_per_patient_range;
    let n_elec = rng.gen_range(lo..=hi);

    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut profiles: Vec<ElectrodeProfile> = (0..n_elec)
        .map(|j| ElectrodeProfile {
            id: format!("E{j:03}"),
            region: format!("R{:02}", rng.gen_range(0..REGION_POOL)),
            tissue: if rng.gen_bool(0.65) {
                Tissue::Gray
            } else {
                Tissue::White
            },
            hemisphere: if rng.gen_bool(0.5) {
                Hemisphere::Left
            } else {
                Hemisphere::Right
            },
            soz: false,
            base_amp: 5.0 + 0.5 * unit.sample(&mut rng),
            n1_amp: (8.0 + 1.5 * unit.sample(&mut rng)).max(1.0),
            n1_lat: rng.gen_range(15.0..25.0),
            n1_tau: rng.gen_range(20.0..40.0),
            n1_freq: rng.gen_range(8.0..14.0),
            n2_amp: (4.0 + 1.0 * unit.sample(&mut rng)).max(0.5),
            n2_lat: rng.gen_range(80.0..120.0),
            n2_tau: rng.gen_range(60.0..120.0),
            n2_freq: rng.gen_range(2.0..5.0),
        })
        .collect();

    // At least one SOZ electrode per patient so grouped splits always see
    // both classes.
    let n_soz = ((cfg.soz_fraction * n_elec as f64).round() as usize).max(1);
    let mut order: Vec<usize> = (0..n_elec).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    for &j in order.iter().take(n_soz) {
        profiles[j].soz = true;
    }

    let noise = Normal::new(0.0, cfg.noise_sd).unwrap();
    let amp_jitter = Normal::new(0.0, 0.05).unwrap();
    let mut records = Vec::with_capacity(n_elec * (n_elec - 1));
    for s in 0..n_elec {
        for r in 0..n_elec {
            if s == r {
                continue;
            }
            let rec_prof = &profiles[r];
            let gain = if rec_prof.soz { cfg.soz_amp_gain } else { 1.0 };
            let shift = if rec_prof.soz { cfg.soz_meta_shift } else { 0.0 };
            let pair_scale = (0.15 * unit.sample(&mut rng)).exp();
            let stim_amplitude = profiles[s].base_amp + shift + amp_jitter.sample(&mut rng);

            let mut series = Vec::with_capacity(RAW_SERIES_LEN);
            for t in 0..RAW_SERIES_LEN {
                if t < ARTIFACT_SAMPLES {
                    // Stimulus artifact: overwrites noise so its magnitude is
                    // guaranteed, alternating polarity, decaying.
                    let mag = [40.0, 34.0, 28.0, 22.0, 16.0][t] * cfg.noise_sd;
                    series.push(if t % 2 == 0 { mag } else { -mag });
                } else {
                    let t_ms = t as f64;
                    let mut v = noise.sample(&mut rng);
                    v += gain * pair_scale * damped_sinusoid(t_ms, rec_prof.n1_lat, rec_prof.n1_tau, rec_prof.n1_freq, rec_prof.n1_amp);
                    v += gain * pair_scale * damped_sinusoid(t_ms, rec_prof.n2_lat, rec_prof.n2_tau, rec_prof.n2_freq, rec_prof.n2_amp);
                    series.push(v);
                }
            }

            records.push(CcepRecord {
                patient_id: pid.clone(),
                stim_electrode_id: profiles[s].id.clone(),
                rec_electrode_id: rec_prof.id.clone(),
                stim_amplitude,
                stim_region: profiles[s].region.clone(),
                rec_region: rec_prof.region.clone(),
                tissue_type: rec_prof.tissue,
                hemisphere: rec_prof.hemisphere,
                series,
                soz: rec_prof.soz as u8,
            });
        }
    }
    records
}

fn damped_sinusoid(t_ms: f64, latency: f64, tau: f64, freq_hz: f64, amp: f64) -> f64 {
    if t_ms < latency {
        return 0.0;
    }
    let dt = t_ms - latency;
    amp * (-dt / tau).exp() * (2.0 * PI * freq_hz * dt / SAMPLING_RATE_HZ).sin()
}

/// Relabel a cohort: `soz = 1` exactly for records whose recording electrode
/// is in the set for its patient; everything else gets 0. Deterministic hook
/// for label-plumbing tests.
pub fn plant_labels(
    cohort: &Cohort,
    per_patient_soz: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Cohort> {
    let records = match cohort {
        Cohort::Raw(c) => &c.records,
        Cohort::Cleaned(c) => &c.records,
        Cohort::Encoded(_) => {
            return Err(Error::WrongStage {
                expected: crate::dataset::Stage::Cleaned,
                found: crate::dataset::Stage::Encoded,
            })
        }
    };

    // Every referenced electrode must exist as a recording electrode.
    let mut known: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        known
            .entry(r.patient_id.as_str())
            .or_default()
            .insert(r.rec_electrode_id.as_str());
    }
    for (patient, electrodes) in per_patient_soz {
        let have = known.get(patient.as_str());
        for e in electrodes {
            if !have.is_some_and(|set| set.contains(e.as_str())) {
                return Err(Error::UnknownElectrode {
                    patient: patient.clone(),
                    electrode: e.clone(),
                });
            }
        }
    }

    let relabel = |r: &CcepRecord| {
        let mut r = r.clone();
        r.soz = per_patient_soz
            .get(&r.patient_id)
            .is_some_and(|set| set.contains(&r.rec_electrode_id)) as u8;
        r
    };
    let relabeled: Vec<CcepRecord> = records.iter().map(relabel).collect();
    Ok(match cohort {
        Cohort::Raw(_) => Cohort::Raw(RawCohort::new(relabeled)?),
        _ => Cohort::Cleaned(crate::dataset::CleanedCohort::new(relabeled)?),
    })
}
