//! Loading, validation and descriptive statistics for the voice dataset.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};

/// The 22 dysphonia measurements in canonical order.
pub const FEATURE_NAMES: [&str; 22] = [
    "MDVP:Fo(Hz)",
    "MDVP:Fhi(Hz)",
    "MDVP:Flo(Hz)",
    "MDVP:Jitter(%)",
    "MDVP:Jitter(Abs)",
    "MDVP:RAP",
    "MDVP:PPQ",
    "Jitter:DDP",
    "MDVP:Shimmer",
    "MDVP:Shimmer(dB)",
    "Shimmer:APQ3",
    "Shimmer:APQ5",
    "MDVP:APQ",
    "Shimmer:DDA",
    "NHR",
    "HNR",
    "RPDE",
    "DFA",
    "spread1",
    "spread2",
    "D2",
    "PPE",
];

pub const NAME_COLUMN: &str = "name";
pub const STATUS_COLUMN: &str = "status";

/// Fundamental-frequency columns, which must be strictly positive.
const FREQUENCY_FEATURES: [usize; 3] = [0, 1, 2];

/// Class counts stated alongside the published description of the file
/// (PD, healthy). Checked against the file at load; the file wins.
pub const REPORTED_CLASS_COUNTS: (usize, usize) = (48, 147);

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("line {line}, column `{column}`: cannot parse value")]
    ParseError { line: u64, column: String },
    #[error("line {line}, column `{column}`: value is not finite")]
    NonFiniteValue { line: u64, column: String },
    #[error("line {line}, column `{column}`: frequency must be positive")]
    NonPositiveFrequency { line: u64, column: String },
    #[error("line {line}: status must be 0 or 1")]
    InvalidStatus { line: u64 },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: u64, expected: usize, found: usize },
    #[error("duplicate record name `{0}`")]
    DuplicateName(String),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("need at least {needed} records, have {have}")]
    TooFewRecords { needed: usize, have: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceRecord {
    pub name: String,
    /// Values in [`FEATURE_NAMES`] order.
    pub features: [f64; 22],
    pub status: Label,
}

impl VoiceRecord {
    pub fn feature(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|j| self.features[j])
    }
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<VoiceRecord>,
}

impl Dataset {
    /// Validates record invariants and name uniqueness.
    pub fn from_records(records: Vec<VoiceRecord>) -> Result<Self, IngestError> {
        if records.is_empty() {
            return Err(IngestError::EmptyFile);
        }
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 2;
            validate_record(r, line)?;
            if !seen.insert(r.name.as_str()) {
                return Err(IngestError::DuplicateName(r.name.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[VoiceRecord] {
        &self.records
    }

    pub fn feature_names(&self) -> &'static [&'static str; 22] {
        &FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.status).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.name.as_str()).collect()
    }

    /// `[healthy, pd]`
    pub fn class_counts(&self) -> [usize; 2] {
        let pd = self.records.iter().filter(|r| r.status == 1).count();
        [self.records.len() - pd, pd]
    }

    /// Feature values of `j`-th canonical feature across records.
    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.features[j]).collect()
    }

    pub fn to_feature_matrix(&self) -> FeatureMatrix {
        let n = self.records.len();
        let values = Array2::from_shape_fn((n, FEATURE_NAMES.len()), |(i, j)| {
            self.records[i].features[j]
        });
        FeatureMatrix::new(
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            values,
            self.labels(),
        )
        .expect("dataset invariants guarantee a well-formed matrix")
    }

    /// Serializes in the original file's column order (status after HNR).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header = file_column_order().join(",");
        out.push_str(&header);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.name);
            for (j, v) in r.features.iter().enumerate() {
                if j == 16 {
                    let _ = write!(out, ",{}", r.status);
                }
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Compares the file's class tally with [`REPORTED_CLASS_COUNTS`].
    /// Returns a description of the discrepancy, if any.
    pub fn reported_count_discrepancy(&self) -> Option<String> {
        let [healthy, pd] = self.class_counts();
        let (rep_pd, rep_healthy) = REPORTED_CLASS_COUNTS;
        if (pd, healthy) == (rep_pd, rep_healthy) {
            return None;
        }
        let transposed = (pd, healthy) == (rep_healthy, rep_pd);
        Some(format!(
            "file has {pd} PD (status=1) and {healthy} healthy (status=0) records; \
             the published description states {rep_pd} PD and {rep_healthy} healthy{}; \
             using the file",
            if transposed { " (counts transposed)" } else { "" }
        ))
    }
}

/// Header order of the reference UCI file.
pub fn file_column_order() -> Vec<&'static str> {
    let mut cols = vec![NAME_COLUMN];
    cols.extend_from_slice(&FEATURE_NAMES[..16]);
    cols.push(STATUS_COLUMN);
    cols.extend_from_slice(&FEATURE_NAMES[16..]);
    cols
}

fn validate_record(r: &VoiceRecord, line: u64) -> Result<(), IngestError> {
    for (j, v) in r.features.iter().enumerate() {
        if !v.is_finite() {
            return Err(IngestError::NonFiniteValue {
                line,
                column: FEATURE_NAMES[j].to_string(),
            });
        }
    }
    for &j in &FREQUENCY_FEATURES {
        if r.features[j] <= 0.0 {
            return Err(IngestError::NonPositiveFrequency {
                line,
                column: FEATURE_NAMES[j].to_string(),
            });
        }
    }
    if r.status > 1 {
        return Err(IngestError::InvalidStatus { line });
    }
    Ok(())
}

/// Reads the UCI CSV from disk. See [`parse_dataset`].
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let file = std::fs::File::open(path)?;
    let ds = parse_dataset(file)?;
    if let Some(note) = ds.reported_count_discrepancy() {
        log::warn!("{note}");
    }
    Ok(ds)
}

/// Where each required column sits in a header row.
struct ColumnMap {
    name: usize,
    status: Option<usize>,
    features: [usize; 22],
    width: usize,
}

fn map_header(header: &csv::StringRecord, require_status: bool) -> Result<ColumnMap, IngestError> {
    let mut seen = HashSet::new();
    for h in header.iter() {
        let h = h.trim();
        if !seen.insert(h) {
            return Err(IngestError::DuplicateColumn(h.to_string()));
        }
        let known = h == NAME_COLUMN || h == STATUS_COLUMN || feature_index(h).is_some();
        if !known {
            return Err(IngestError::UnknownColumn(h.to_string()));
        }
    }
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let name = find(NAME_COLUMN).ok_or_else(|| IngestError::MissingColumn(NAME_COLUMN.into()))?;
    let status = find(STATUS_COLUMN);
    if require_status && status.is_none() {
        return Err(IngestError::MissingColumn(STATUS_COLUMN.into()));
    }
    let mut features = [0usize; 22];
    for (j, f) in FEATURE_NAMES.iter().enumerate() {
        features[j] = find(f).ok_or_else(|| IngestError::MissingColumn(f.to_string()))?;
    }
    Ok(ColumnMap {
        name,
        status,
        features,
        width: header.len(),
    })
}

fn parse_field(rec: &csv::StringRecord, idx: usize, column: &str, line: u64) -> Result<f64, IngestError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    let v: f64 = raw.parse().map_err(|_| IngestError::ParseError {
        line,
        column: column.to_string(),
    })?;
    if !v.is_finite() {
        return Err(IngestError::NonFiniteValue {
            line,
            column: column.to_string(),
        });
    }
    Ok(v)
}

/// Rows parsed from a CSV that may or may not carry the status column.
struct ParsedRows {
    names: Vec<String>,
    features: Vec<[f64; 22]>,
    status: Option<Vec<Label>>,
}

fn parse_rows(reader: impl Read, require_status: bool) -> Result<ParsedRows, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(IngestError::EmptyFile);
    }
    let map = map_header(&header, require_status)?;
    let mut rows = ParsedRows {
        names: Vec::new(),
        features: Vec::new(),
        status: map.status.map(|_| Vec::new()),
    };
    for result in rdr.records() {
        let rec = result.map_err(|e| IngestError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != map.width {
            return Err(IngestError::FieldCount {
                line,
                expected: map.width,
                found: rec.len(),
            });
        }
        let mut features = [0.0; 22];
        for (j, &idx) in map.features.iter().enumerate() {
            features[j] = parse_field(&rec, idx, FEATURE_NAMES[j], line)?;
        }
        if let (Some(idx), Some(status)) = (map.status, rows.status.as_mut()) {
            let s = match rec[idx].trim() {
                "0" => 0,
                "1" => 1,
                other => match other.parse::<f64>() {
                    Ok(v) if v == 0.0 => 0,
                    Ok(v) if v == 1.0 => 1,
                    Ok(_) => return Err(IngestError::InvalidStatus { line }),
                    Err(_) => {
                        return Err(IngestError::ParseError {
                            line,
                            column: STATUS_COLUMN.into(),
                        })
                    }
                },
            };
            status.push(s);
        }
        rows.names.push(rec[map.name].trim().to_string());
        rows.features.push(features);
    }
    if rows.names.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(rows)
}

/// Parses the dataset CSV. Columns are located by header name; unknown
/// columns are rejected.
pub fn parse_dataset(reader: impl Read) -> Result<Dataset, IngestError> {
    let rows = parse_rows(reader, true)?;
    let status = rows.status.expect("status required");
    let records = rows
        .names
        .into_iter()
        .zip(rows.features)
        .zip(status)
        .map(|((name, features), status)| VoiceRecord {
            name,
            features,
            status,
        })
        .collect();
    Dataset::from_records(records)
}

/// Records to score: the status column is optional.
#[derive(Debug, Clone)]
pub struct ScoringInput {
    pub names: Vec<String>,
    pub features: Array2<f64>,
    pub status: Option<Vec<Label>>,
}

pub fn parse_scoring_input(reader: impl Read) -> Result<ScoringInput, IngestError> {
    let rows = parse_rows(reader, false)?;
    let n = rows.names.len();
    let features = Array2::from_shape_fn((n, 22), |(i, j)| rows.features[i][j]);
    Ok(ScoringInput {
        names: rows.names,
        features,
        status: rows.status,
    })
}

/// Per-feature descriptive statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl FeatureSummary {
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of an empty column");
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        FeatureSummary {
            count: n,
            mean,
            std,
            min: sorted[0],
            q25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            max: sorted[n - 1],
        }
    }

    fn cells(&self) -> [f64; 8] {
        [
            self.count as f64,
            self.mean,
            self.std,
            self.min,
            self.q25,
            self.median,
            self.q75,
            self.max,
        ]
    }
}

/// Quantile by linear interpolation at position `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub features: Vec<(String, FeatureSummary)>,
}

const SUMMARY_ROWS: [&str; 8] = ["count", "mean", "std", "min", "25%", "50%", "75%", "max"];

impl SummaryTable {
    pub fn get(&self, feature: &str) -> Option<&FeatureSummary> {
        self.features.iter().find(|(n, _)| n == feature).map(|(_, s)| s)
    }

    /// Statistics as rows, features as columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic");
        for (name, _) in &self.features {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for (row, label) in SUMMARY_ROWS.iter().enumerate() {
            out.push_str(label);
            for (_, s) in &self.features {
                let _ = write!(out, ",{:.6}", s.cells()[row]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Statistic |");
        for (name, _) in &self.features {
            let _ = write!(out, " {name} |");
        }
        out.push_str("\n|---|");
        for _ in &self.features {
            out.push_str("---:|");
        }
        out.push('\n');
        for (row, label) in SUMMARY_ROWS.iter().enumerate() {
            let _ = write!(out, "| {label} |");
            for (_, s) in &self.features {
                let _ = write!(out, " {:.6} |", s.cells()[row]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn summarize(ds: &Dataset) -> SummaryTable {
    let features = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| (name.to_string(), FeatureSummary::from_values(&ds.feature_column(j))))
        .collect();
    SummaryTable { features }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub labels: Vec<String>,
    pub values: Array2<f64>,
}

impl CorrMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[[i, j]])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.labels.len() {
                let _ = write!(out, ",{:.6}", self.values[[i, j]]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| |");
        for l in &self.labels {
            let _ = write!(out, " {l} |");
        }
        out.push_str("\n|---|");
        for _ in &self.labels {
            out.push_str("---:|");
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, "| {l} |");
            for j in 0..self.labels.len() {
                let _ = write!(out, " {:.2} |", self.values[[i, j]]);
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlation between every pair of columns.
pub fn pearson_matrix(labels: Vec<String>, columns: &[Vec<f64>]) -> Result<CorrMatrix, IngestError> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(IngestError::TooFewRecords { needed: 2, have: n });
    }
    let d = columns.len();
    let mut centered = Vec::with_capacity(d);
    let mut norms = Vec::with_capacity(d);
    for (col, label) in columns.iter().zip(&labels) {
        let mean = col.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss = c.iter().map(|v| v * v).sum::<f64>();
        if ss <= 0.0 {
            return Err(IngestError::ZeroVariance(label.clone()));
        }
        norms.push(ss.sqrt());
        centered.push(c);
    }
    let mut values = Array2::<f64>::eye(d);
    for i in 0..d {
        for j in (i + 1)..d {
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[[i, j]] = r;
            values[[j, i]] = r;
        }
    }
    Ok(CorrMatrix { labels, values })
}

/// Pearson correlations among the 22 features, plus `status` when requested.
pub fn correlation_matrix(ds: &Dataset, include_status: bool) -> Result<CorrMatrix, IngestError> {
    let mut labels: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let mut columns: Vec<Vec<f64>> = (0..22).map(|j| ds.feature_column(j)).collect();
    if include_status {
        labels.push(STATUS_COLUMN.to_string());
        columns.push(ds.records.iter().map(|r| f64::from(r.status)).collect());
    }
    pearson_matrix(labels, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        file_column_order().join(",")
    }

    fn row(name: &str, base: f64, status: u8) -> String {
        let mut fields = vec![name.to_string()];
        for j in 0..22 {
            if j == 16 {
                fields.push(status.to_string());
            }
            fields.push(format!("{}", base + j as f64));
        }
        fields.join(",")
    }

    #[test]
    fn header_only_is_empty_file() {
        let err = parse_dataset(format!("{}\n", header()).as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::EmptyFile));
    }

    #[test]
    fn completely_empty_input() {
        assert!(matches!(parse_dataset(&b""[..]).unwrap_err(), IngestError::EmptyFile));
    }

    #[test]
    fn columns_located_by_name() {
        // reverse the column order; values must land in the same slots
        let cols = file_column_order();
        let rev: Vec<&str> = cols.iter().rev().copied().collect();
        let r = row("a", 1.0, 1);
        let vals: Vec<&str> = r.split(',').rev().collect();
        let text = format!("{}\n{}\n", rev.join(","), vals.join(","));
        let ds = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(ds.records()[0].features[0], 1.0);
        assert_eq!(ds.records()[0].feature("PPE"), Some(22.0));
        assert_eq!(ds.records()[0].status, 1);
    }

    #[test]
    fn missing_column_named() {
        let text = header().replace(",PPE", "") + "\n";
        match parse_dataset(text.as_bytes()).unwrap_err() {
            IngestError::MissingColumn(c) => assert_eq!(c, "PPE"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_column_rejected() {
        let text = format!("{},extra\n{},0\n", header(), row("a", 1.0, 0));
        assert!(matches!(
            parse_dataset(text.as_bytes()).unwrap_err(),
            IngestError::UnknownColumn(c) if c == "extra"
        ));
    }

    #[test]
    fn parse_error_reports_line_and_column() {
        let bad = row("b", 1.0, 0).replacen(",2,", ",abc,", 1);
        let text = format!("{}\n{}\n{}\n", header(), row("a", 1.0, 0), bad);
        match parse_dataset(text.as_bytes()).unwrap_err() {
            IngestError::ParseError { line, column } => {
                assert_eq!(line, 3);
                assert_eq!(column, "MDVP:Fhi(Hz)");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let bad = row("a", 1.0, 0).replacen(",2,", ",NaN,", 1);
        let text = format!("{}\n{}\n", header(), bad);
        assert!(matches!(
            parse_dataset(text.as_bytes()).unwrap_err(),
            IngestError::NonFiniteValue { line: 2, .. }
        ));
    }

    #[test]
    fn status_must_be_binary() {
        let text = format!("{}\n{}\n", header(), row("a", 1.0, 2));
        assert!(matches!(
            parse_dataset(text.as_bytes()).unwrap_err(),
            IngestError::InvalidStatus { line: 2 }
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = format!("{}\n{}\n{}\n", header(), row("a", 1.0, 0), row("a", 2.0, 1));
        assert!(matches!(
            parse_dataset(text.as_bytes()).unwrap_err(),
            IngestError::DuplicateName(n) if n == "a"
        ));
    }

    #[test]
    fn nonpositive_frequency_rejected() {
        let text = format!("{}\n{}\n", header(), row("a", 0.0, 0));
        assert!(matches!(
            parse_dataset(text.as_bytes()).unwrap_err(),
            IngestError::NonPositiveFrequency { .. }
        ));
    }

    #[test]
    fn csv_round_trip() {
        let text = format!(
            "{}\n{}\n{}\n",
            header(),
            row("a", 0.1234567890123, 0),
            row("b", 7.5e-6, 1)
        );
        let ds = parse_dataset(text.as_bytes()).unwrap();
        let again = parse_dataset(ds.to_csv().as_bytes()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let s = FeatureSummary::from_values(&[4.0, 1.0, 3.0, 2.0]);
        // positions 0.75, 1.5, 2.25
        assert_eq!(s.q25, 1.75);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q75, 3.25);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
    }

    #[test]
    fn constant_column_summary() {
        let s = FeatureSummary::from_values(&[3.5; 7]);
        assert_eq!(s.std, 0.0);
        for v in [s.min, s.q25, s.median, s.q75, s.max, s.mean] {
            assert_eq!(v, 3.5);
        }
    }

    #[test]
    fn zero_variance_correlation_errors() {
        let err = pearson_matrix(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]],
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::ZeroVariance(c) if c == "b"));
    }

    #[test]
    fn perfect_anticorrelation() {
        let c = pearson_matrix(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0, 3.0], vec![6.0, 4.0, 2.0]],
        )
        .unwrap();
        assert!((c.values[[0, 1]] + 1.0).abs() < 1e-15);
        assert_eq!(c.values[[0, 0]], 1.0);
    }

    #[test]
    fn discrepancy_note_detects_transposition() {
        let mut records = Vec::new();
        for i in 0..195 {
            let mut features = [1.0; 22];
            features[3] = i as f64;
            records.push(VoiceRecord {
                name: format!("r{i}"),
                features,
                status: u8::from(i < 147),
            });
        }
        let ds = Dataset::from_records(records).unwrap();
        let note = ds.reported_count_discrepancy().unwrap();
        assert!(note.contains("transposed"), "{note}");
    }
}
