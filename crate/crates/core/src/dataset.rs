//! Domain types for CCEP records and cohorts, plus CSV ingestion and
//! serialization.
//!
//! A cohort moves through three stages: `raw` (500-sample series straight off
//! the recording), `cleaned` (first 5 ms trimmed, 495 samples), and `encoded`
//! (categorical metadata replaced by target-encoded floats). The stage
//! transitions are enforced by distinct types so the pipeline cannot be wired
//! out of order.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Samples per series before artifact trimming.
pub const RAW_SERIES_LEN: usize = 500;
/// Samples per series after the first 5 ms are removed.
pub const TRIMMED_SERIES_LEN: usize = 495;
/// Metadata features per record once encoded.
pub const META_FEATURES: usize = 7;

/// Encoded metadata column names, in schema and feature-matrix order.
pub const ENCODED_META_COLUMNS: [&str; META_FEATURES] = [
    "stim_electrode_id_enc",
    "rec_electrode_id_enc",
    "stim_amplitude",
    "stim_region_enc",
    "rec_region_enc",
    "tissue_type_enc",
    "hemisphere_enc",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tissue {
    Gray,
    White,
}

impl Tissue {
    pub fn as_str(self) -> &'static str {
        match self {
            Tissue::Gray => "gray",
            Tissue::White => "white",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gray" => Some(Tissue::Gray),
            "white" => Some(Tissue::White),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Left,
    Right,
}

impl Hemisphere {
    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::Left => "left",
            Hemisphere::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(Hemisphere::Left),
            "right" => Some(Hemisphere::Right),
            _ => None,
        }
    }
}

/// Processing stage of a cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Cleaned,
    Encoded,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Raw => "raw",
            Stage::Cleaned => "cleaned",
            Stage::Encoded => "encoded",
        })
    }
}

/// One stimulation-response trial: time series plus metadata and SOZ label.
#[derive(Debug, Clone, PartialEq)]
pub struct CcepRecord {
    pub patient_id: String,
    pub stim_electrode_id: String,
    pub rec_electrode_id: String,
    pub stim_amplitude: f64,
    pub stim_region: String,
    pub rec_region: String,
    pub tissue_type: Tissue,
    pub hemisphere: Hemisphere,
    /// One sample per millisecond, microvolts.
    pub series: Vec<f64>,
    /// 1 if the recording electrode is inside the seizure onset zone.
    pub soz: u8,
}

impl CcepRecord {
    fn validate(&self, expected_len: usize, row: usize) -> Result<()> {
        if self.series.len() != expected_len {
            return Err(Error::RowWidthMismatch {
                row,
                expected: expected_len,
                found: self.series.len(),
            });
        }
        if let Some(i) = self.series.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row,
                col: format!("t{i:03}"),
            });
        }
        if !self.stim_amplitude.is_finite() {
            return Err(Error::NonFiniteValue {
                row,
                col: "stim_amplitude".into(),
            });
        }
        if self.soz > 1 {
            return Err(Error::BadEnum {
                row,
                col: "soz".into(),
            });
        }
        Ok(())
    }
}

/// A record whose categorical metadata has been replaced by finite floats.
///
/// `meta` is laid out in [`ENCODED_META_COLUMNS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRecord {
    pub patient_id: String,
    pub meta: [f64; META_FEATURES],
    pub series: Vec<f64>,
    pub soz: u8,
}

macro_rules! record_cohort {
    ($name:ident, $len:expr, $stage:expr) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub(crate) records: Vec<CcepRecord>,
        }

        impl $name {
            /// Validates series length, finiteness, and label range.
            pub fn new(records: Vec<CcepRecord>) -> Result<Self> {
                for (row, r) in records.iter().enumerate() {
                    r.validate($len, row)?;
                }
                Ok(Self { records })
            }

            pub fn records(&self) -> &[CcepRecord] {
                &self.records
            }

            pub fn len(&self) -> usize {
                self.records.len()
            }

            pub fn is_empty(&self) -> bool {
                self.records.is_empty()
            }

            /// Distinct patient ids, sorted.
            pub fn patients(&self) -> BTreeSet<String> {
                self.records
                    .iter()
                    .map(|r| r.patient_id.clone())
                    .collect()
            }

            /// Rows whose patient id is in `keep`, order preserved.
            pub fn filter_patients(&self, keep: &BTreeSet<String>) -> Self {
                Self {
                    records: self
                        .records
                        .iter()
                        .filter(|r| keep.contains(&r.patient_id))
                        .cloned()
                        .collect(),
                }
            }
        }
    };
}

record_cohort!(RawCohort, RAW_SERIES_LEN, Stage::Raw);
record_cohort!(CleanedCohort, TRIMMED_SERIES_LEN, Stage::Cleaned);

/// Cohort after target encoding; series untouched, metadata numeric.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCohort {
    pub(crate) records: Vec<EncodedRecord>,
}

impl EncodedCohort {
    pub fn new(records: Vec<EncodedRecord>) -> Result<Self> {
        for (row, r) in records.iter().enumerate() {
            if r.series.len() != TRIMMED_SERIES_LEN {
                return Err(Error::RowWidthMismatch {
                    row,
                    expected: TRIMMED_SERIES_LEN,
                    found: r.series.len(),
                });
            }
            if let Some(i) = r.series.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row,
                    col: format!("t{i:03}"),
                });
            }
            if let Some(i) = r.meta.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row,
                    col: ENCODED_META_COLUMNS[i].into(),
                });
            }
            if r.soz > 1 {
                return Err(Error::BadEnum {
                    row,
                    col: "soz".into(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[EncodedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn patients(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .map(|r| r.patient_id.clone())
            .collect()
    }

    /// Flatten into a design matrix: 495 series columns, then the 7
    /// metadata columns when `include_metadata` is set.
    pub fn to_matrix(&self, include_metadata: bool) -> FeatureMatrix {
        let d = if include_metadata {
            TRIMMED_SERIES_LEN + META_FEATURES
        } else {
            TRIMMED_SERIES_LEN
        };
        let mut values = Vec::with_capacity(self.records.len() * d);
        let mut labels = Vec::with_capacity(self.records.len());
        let mut keys = Vec::with_capacity(self.records.len());
        for r in &self.records {
            values.extend_from_slice(&r.series);
            if include_metadata {
                values.extend_from_slice(&r.meta);
            }
            labels.push(r.soz);
            keys.push(r.patient_id.clone());
        }
        let mut names: Vec<String> = (0..TRIMMED_SERIES_LEN).map(|i| format!("t{i:03}")).collect();
        if include_metadata {
            names.extend(ENCODED_META_COLUMNS.iter().map(|s| s.to_string()));
        }
        FeatureMatrix {
            values,
            n_cols: d,
            labels,
            patient_keys: keys,
            column_names: names,
        }
    }
}

/// Stage-tagged cohort, mainly for I/O and CLI plumbing. Pipeline code works
/// with the concrete stage types.
#[derive(Debug, Clone, PartialEq)]
pub enum Cohort {
    Raw(RawCohort),
    Cleaned(CleanedCohort),
    Encoded(EncodedCohort),
}

impl Cohort {
    pub fn stage(&self) -> Stage {
        match self {
            Cohort::Raw(_) => Stage::Raw,
            Cohort::Cleaned(_) => Stage::Cleaned,
            Cohort::Encoded(_) => Stage::Encoded,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Cohort::Raw(c) => c.len(),
            Cohort::Cleaned(c) => c.len(),
            Cohort::Encoded(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patients(&self) -> BTreeSet<String> {
        match self {
            Cohort::Raw(c) => c.patients(),
            Cohort::Cleaned(c) => c.patients(),
            Cohort::Encoded(c) => c.patients(),
        }
    }

    pub fn into_raw(self) -> Result<RawCohort> {
        match self {
            Cohort::Raw(c) => Ok(c),
            other => Err(Error::WrongStage {
                expected: Stage::Raw,
                found: other.stage(),
            }),
        }
    }

    pub fn into_cleaned(self) -> Result<CleanedCohort> {
        match self {
            Cohort::Cleaned(c) => Ok(c),
            other => Err(Error::WrongStage {
                expected: Stage::Cleaned,
                found: other.stage(),
            }),
        }
    }

    pub fn into_encoded(self) -> Result<EncodedCohort> {
        match self {
            Cohort::Encoded(c) => Ok(c),
            other => Err(Error::WrongStage {
                expected: Stage::Encoded,
                found: other.stage(),
            }),
        }
    }

    /// Design matrix; requires the encoded stage.
    pub fn to_matrix(&self, include_metadata: bool) -> Result<FeatureMatrix> {
        match self {
            Cohort::Encoded(c) => Ok(c.to_matrix(include_metadata)),
            other => Err(Error::WrongStage {
                expected: Stage::Encoded,
                found: other.stage(),
            }),
        }
    }

    /// Read a cohort from CSV, validating the header and every row against
    /// the schema for `stage`. Errors carry 0-based data-row indices.
    pub fn load_csv(path: &Path, stage: Stage) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::IoFailure {
            path: path.to_owned(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(std::io::BufReader::new(file));

        let expected_header = header_for(stage);
        let mut records = reader.records();
        let header = match records.next() {
            Some(rec) => rec.map_err(|e| csv_io_error(path, e))?,
            None => return Err(Error::MissingColumn(expected_header[0].clone())),
        };
        for (i, want) in expected_header.iter().enumerate() {
            match header.get(i) {
                Some(got) if got == want => {}
                _ => return Err(Error::MissingColumn(want.clone())),
            }
        }
        if header.len() != expected_header.len() {
            return Err(Error::RowWidthMismatch {
                row: 0,
                expected: expected_header.len(),
                found: header.len(),
            });
        }

        let series_len = match stage {
            Stage::Raw => RAW_SERIES_LEN,
            Stage::Cleaned | Stage::Encoded => TRIMMED_SERIES_LEN,
        };
        match stage {
            Stage::Raw | Stage::Cleaned => {
                let mut out = Vec::new();
                for (row, rec) in records.enumerate() {
                    let rec = rec.map_err(|e| csv_io_error(path, e))?;
                    out.push(parse_record(&rec, row, series_len, &expected_header)?);
                }
                match stage {
                    Stage::Raw => Ok(Cohort::Raw(RawCohort::new(out)?)),
                    _ => Ok(Cohort::Cleaned(CleanedCohort::new(out)?)),
                }
            }
            Stage::Encoded => {
                let mut out = Vec::new();
                for (row, rec) in records.enumerate() {
                    let rec = rec.map_err(|e| csv_io_error(path, e))?;
                    out.push(parse_encoded(&rec, row, &expected_header)?);
                }
                Ok(Cohort::Encoded(EncodedCohort::new(out)?))
            }
        }
    }

    /// Write the cohort to CSV with deterministic row order and shortest
    /// round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let file = std::fs::File::create(path).map_err(|source| Error::IoFailure {
            path: path.to_owned(),
            source,
        })?;
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Never)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(std::io::BufWriter::new(file));

        let header = header_for(self.stage());
        w.write_record(&header).map_err(|e| csv_io_error(path, e))?;
        let mut field_buf = Vec::with_capacity(header.len());
        let categorical_rows = match self {
            Cohort::Raw(c) => Some(c.records()),
            Cohort::Cleaned(c) => Some(c.records()),
            Cohort::Encoded(_) => None,
        };
        if let Some(rows) = categorical_rows {
            for r in rows {
                field_buf.clear();
                field_buf.push(r.patient_id.clone());
                field_buf.push(r.stim_electrode_id.clone());
                field_buf.push(r.rec_electrode_id.clone());
                field_buf.push(fmt_f64(r.stim_amplitude));
                field_buf.push(r.stim_region.clone());
                field_buf.push(r.rec_region.clone());
                field_buf.push(r.tissue_type.as_str().to_string());
                field_buf.push(r.hemisphere.as_str().to_string());
                field_buf.extend(r.series.iter().map(|v| fmt_f64(*v)));
                field_buf.push(r.soz.to_string());
                w.write_record(&field_buf).map_err(|e| csv_io_error(path, e))?;
            }
        } else if let Cohort::Encoded(c) = self {
            for r in c.records() {
                field_buf.clear();
                field_buf.push(r.patient_id.clone());
                field_buf.extend(r.meta.iter().map(|v| fmt_f64(*v)));
                field_buf.extend(r.series.iter().map(|v| fmt_f64(*v)));
                field_buf.push(r.soz.to_string());
                w.write_record(&field_buf).map_err(|e| csv_io_error(path, e))?;
            }
        }
        w.flush().map_err(|source| Error::IoFailure {
            path: path.to_owned(),
            source,
        })?;
        Ok(())
    }
}

impl Cohort {
    pub fn as_raw(&self) -> Result<&RawCohort> {
        match self {
            Cohort::Raw(c) => Ok(c),
            other => Err(Error::WrongStage {
                expected: Stage::Raw,
                found: other.stage(),
            }),
        }
    }
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::IoFailure {
        path: path.to_owned(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    }
}

/// Shortest decimal that round-trips the exact f64 value.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn header_for(stage: Stage) -> Vec<String> {
    let mut h: Vec<String> = Vec::new();
    h.push("patient_id".into());
    match stage {
        Stage::Raw | Stage::Cleaned => {
            h.push("stim_electrode_id".into());
            h.push("rec_electrode_id".into());
            h.push("stim_amplitude".into());
            h.push("stim_region".into());
            h.push("rec_region".into());
            h.push("tissue_type".into());
            h.push("hemisphere".into());
        }
        Stage::Encoded => {
            h.extend(ENCODED_META_COLUMNS.iter().map(|s| s.to_string()));
        }
    }
    let series_len = if stage == Stage::Raw {
        RAW_SERIES_LEN
    } else {
        TRIMMED_SERIES_LEN
    };
    h.extend((0..series_len).map(|i| format!("t{i:03}")));
    h.push("soz".into());
    h
}

fn parse_float(field: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::NonFiniteValue {
        row,
        col: col.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            row,
            col: col.to_string(),
        });
    }
    Ok(v)
}

fn parse_record(
    rec: &csv::StringRecord,
    row: usize,
    series_len: usize,
    header: &[String],
) -> Result<CcepRecord> {
    if rec.len() != header.len() {
        return Err(Error::RowWidthMismatch {
            row,
            expected: header.len(),
            found: rec.len(),
        });
    }
    let field = |i: usize| rec.get(i).unwrap_or_default();
    let tissue = Tissue::parse(field(6)).ok_or(Error::BadEnum {
        row,
        col: "tissue_type".into(),
    })?;
    let hemisphere = Hemisphere::parse(field(7)).ok_or(Error::BadEnum {
        row,
        col: "hemisphere".into(),
    })?;
    let mut series = Vec::with_capacity(series_len);
    for i in 0..series_len {
        series.push(parse_float(field(8 + i), row, &header[8 + i])?);
    }
    let soz = match field(8 + series_len) {
        "0" => 0,
        "1" => 1,
        _ => {
            return Err(Error::BadEnum {
                row,
                col: "soz".into(),
            })
        }
    };
    Ok(CcepRecord {
        patient_id: field(0).to_string(),
        stim_electrode_id: field(1).to_string(),
        rec_electrode_id: field(2).to_string(),
        stim_amplitude: parse_float(field(3), row, "stim_amplitude")?,
        stim_region: field(4).to_string(),
        rec_region: field(5).to_string(),
        tissue_type: tissue,
        hemisphere,
        series,
        soz,
    })
}

fn parse_encoded(rec: &csv::StringRecord, row: usize, header: &[String]) -> Result<EncodedRecord> {
    if rec.len() != header.len() {
        return Err(Error::RowWidthMismatch {
            row,
            expected: header.len(),
            found: rec.len(),
        });
    }
    let field = |i: usize| rec.get(i).unwrap_or_default();
    let mut meta = [0.0; META_FEATURES];
    for (i, slot) in meta.iter_mut().enumerate() {
        *slot = parse_float(field(1 + i), row, ENCODED_META_COLUMNS[i])?;
    }
    let base = 1 + META_FEATURES;
    let mut series = Vec::with_capacity(TRIMMED_SERIES_LEN);
    for i in 0..TRIMMED_SERIES_LEN {
        series.push(parse_float(field(base + i), row, &header[base + i])?);
    }
    let soz = match field(base + TRIMMED_SERIES_LEN) {
        "0" => 0,
        "1" => 1,
        _ => {
            return Err(Error::BadEnum {
                row,
                col: "soz".into(),
            })
        }
    };
    Ok(EncodedRecord {
        patient_id: field(0).to_string(),
        meta,
        series,
        soz,
    })
}

/// Fully numeric design matrix with aligned labels and patient keys.
///
/// Immutable after construction; row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_cols: usize,
    labels: Vec<u8>,
    patient_keys: Vec<String>,
    column_names: Vec<String>,
}

impl FeatureMatrix {
    /// Build from parts, validating alignment and finiteness.
    pub fn from_parts(
        values: Vec<f64>,
        n_cols: usize,
        labels: Vec<u8>,
        patient_keys: Vec<String>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if patient_keys.len() != n {
            return Err(Error::MetricLengthMismatch {
                a: n,
                b: patient_keys.len(),
            });
        }
        if values.len() != n * n_cols || column_names.len() != n_cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {n} rows x {n_cols} cols",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: i / n_cols,
                col: column_names[i % n_cols].clone(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::BadEnum {
                row: labels.iter().position(|&l| l > 1).unwrap(),
                col: "label".into(),
            });
        }
        Ok(Self {
            values,
            n_cols,
            labels,
            patient_keys,
            column_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn patient_keys(&self) -> &[String] {
        &self.patient_keys
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New matrix from the given row indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        let mut keys = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            keys.push(self.patient_keys[i].clone());
        }
        Self {
            values,
            n_cols: self.n_cols,
            labels,
            patient_keys: keys,
            column_names: self.column_names.clone(),
        }
    }

    /// Keep only the first `n` columns (used to derive the series-only view).
    pub fn prefix_columns(&self, n: usize) -> Self {
        assert!(n <= self.n_cols);
        let mut values = Vec::with_capacity(self.n_rows() * n);
        for i in 0..self.n_rows() {
            values.extend_from_slice(&self.row(i)[..n]);
        }
        Self {
            values,
            n_cols: n,
            labels: self.labels.clone(),
            patient_keys: self.patient_keys.clone(),
            column_names: self.column_names[..n].to_vec(),
        }
    }
}
