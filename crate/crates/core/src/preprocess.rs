//! Standardization, PCA, and stratified splitting.
//!
//! Fitting functions only ever see the matrix they are handed; callers pass
//! the training rows, then apply the fitted transformer to the test rows.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};
use crate::linalg::jacobi_eigen;
use crate::rng::seeded;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_CV_FOLDS: usize = 5;
pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("need at least {needed} rows, have {have}")]
    TooFewRows { needed: usize, have: usize },
    #[error("columns do not match the fitted transformer")]
    ColumnMismatch,
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variance target {0} outside (0, 1]")]
    BadVarianceTarget(f64),
    #[error("covariance has {positive} positive eigenvalues, {needed} needed")]
    DegenerateRank { positive: usize, needed: usize },
    #[error("class {0} has no rows")]
    ClassAbsent(Label),
    #[error("class {class} has {have} rows, need at least {needed}")]
    ClassTooSmall { class: Label, have: usize, needed: usize },
    #[error("test fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("need k >= 2 folds, got {0}")]
    BadFoldCount(usize),
}

/// Per-column mean and sample standard deviation of the fitting data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(x: &FeatureMatrix) -> Result<Scaler, PreprocessError> {
    let n = x.n_rows();
    if n < 2 {
        return Err(PreprocessError::TooFewRows { needed: 2, have: n });
    }
    let mut mean = Vec::with_capacity(x.n_cols());
    let mut std = Vec::with_capacity(x.n_cols());
    for (j, name) in x.columns().iter().enumerate() {
        let col = x.column(j);
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s = var.sqrt();
        if !(s > 0.0) || s <= m.abs() * 1e-14 {
            return Err(PreprocessError::ZeroVariance(name.clone()));
        }
        mean.push(m);
        std.push(s);
    }
    Ok(Scaler {
        columns: x.columns().to_vec(),
        mean,
        std,
    })
}

impl Scaler {
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, PreprocessError> {
        if x.columns() != self.columns.as_slice() {
            return Err(PreprocessError::ColumnMismatch);
        }
        Ok(x.with_values(x.columns().to_vec(), self.transform(x.values())?))
    }

    /// `(x - mean) / std` on a bare array.
    pub fn transform(&self, x: ndarray::ArrayView2<'_, f64>) -> Result<Array2<f64>, PreprocessError> {
        if x.ncols() != self.mean.len() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
        }
        Ok(out)
    }

    pub fn inverse(&self, z: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = z.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v * self.std[j] + self.mean[j]);
        }
        out
    }
}

pub fn apply_scaler(s: &Scaler, x: &FeatureMatrix) -> Result<FeatureMatrix, PreprocessError> {
    s.apply(x)
}

/// Principal components of the sample covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub input_columns: Vec<String>,
    /// `k x d`, rows orthonormal.
    pub components: Array2<f64>,
    /// All `d` eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// All `d` explained-variance ratios.
    pub explained_ratio: Vec<f64>,
    pub k: usize,
    pub mean: Vec<f64>,
}

pub fn fit_pca(x: &FeatureMatrix, variance_target: f64) -> Result<PcaModel, PreprocessError> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(PreprocessError::BadVarianceTarget(variance_target));
    }
    let n = x.n_rows();
    if n < 2 {
        return Err(PreprocessError::TooFewRows { needed: 2, have: n });
    }
    let d = x.n_cols();
    let mean = x.values().mean_axis(Axis(0)).expect("non-empty");
    let centered = &x.values() - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = jacobi_eigen(cov.view(), JACOBI_TOL, JACOBI_MAX_SWEEPS);

    let top = eig.values[0].max(0.0);
    let eigenvalues: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v <= top * 1e-13 { 0.0 } else { v })
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(PreprocessError::DegenerateRank { positive: 0, needed: 1 });
    }
    let explained_ratio: Vec<f64> = eigenvalues.iter().map(|v| v / total).collect();

    let mut cumulative = 0.0;
    let mut k = d;
    for (i, r) in explained_ratio.iter().enumerate() {
        cumulative += r;
        if cumulative + 1e-12 >= variance_target {
            k = i + 1;
            break;
        }
    }
    let positive = eigenvalues.iter().filter(|&&v| v > 0.0).count();
    if k > positive {
        return Err(PreprocessError::DegenerateRank { positive, needed: k });
    }

    let mut components = Array2::<f64>::zeros((k, d));
    for c in 0..k {
        let mut v = eig.vectors.column(c).to_owned();
        let pivot = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.mapv_inplace(|e| -e);
        }
        components.row_mut(c).assign(&v);
    }
    Ok(PcaModel {
        input_columns: x.columns().to_vec(),
        components,
        eigenvalues,
        explained_ratio,
        k,
        mean: mean.to_vec(),
    })
}

impl PcaModel {
    pub fn component_names(&self) -> Vec<String> {
        (1..=self.k).map(|i| format!("PC{i}")).collect()
    }

    pub fn transform(&self, x: ndarray::ArrayView2<'_, f64>) -> Result<Array2<f64>, PreprocessError> {
        if x.ncols() != self.mean.len() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mean = Array1::from(self.mean.clone());
        Ok((&x - &mean).dot(&self.components.t()))
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, PreprocessError> {
        let scores = self.transform(x.values())?;
        Ok(x.with_values(self.component_names(), scores))
    }

    /// Maps scores back to the input space.
    pub fn reconstruct(&self, scores: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        scores.dot(&self.components) + &mean
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_ratio[..self.k].iter().sum()
    }
}

pub fn apply_pca(m: &PcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix, PreprocessError> {
    m.apply(x)
}

/// Row indices of a train/test partition plus the parameters that made it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    /// Stored as the `f64` bit pattern's decimal rendering would lose
    /// equality, so keep it in parts-per-million.
    pub test_fraction_ppm: u32,
}

impl SplitPlan {
    pub fn test_fraction(&self) -> f64 {
        f64::from(self.test_fraction_ppm) / 1e6
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SplitJson::from(self)).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<SplitPlan> {
        let j: SplitJson = serde_json::from_str(s)?;
        Ok(SplitPlan {
            train: j.train,
            test: j.test,
            seed: j.seed,
            test_fraction_ppm: (j.test_fraction * 1e6).round() as u32,
        })
    }

    /// SHA-256 over the train and test index lists.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"train");
        for i in &self.train {
            h.update((*i as u64).to_le_bytes());
        }
        h.update(b"test");
        for i in &self.test {
            h.update((*i as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct SplitJson {
    seed: u64,
    test_fraction: f64,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl From<&SplitPlan> for SplitJson {
    fn from(p: &SplitPlan) -> Self {
        SplitJson {
            seed: p.seed,
            test_fraction: p.test_fraction(),
            train: p.train.clone(),
            test: p.test.clone(),
        }
    }
}

fn class_members(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        members[usize::from(l)].push(i);
    }
    members
}

/// Per-class test counts: `round(count * fraction)`, then nudged by at most
/// one record per class so the total equals `round(n * fraction)`.
pub fn stratified_test_counts(class_counts: &[usize], test_fraction: f64) -> Vec<usize> {
    let n: usize = class_counts.iter().sum();
    let target = (n as f64 * test_fraction).round() as usize;
    let exact: Vec<f64> = class_counts.iter().map(|&c| c as f64 * test_fraction).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.round() as usize).collect();
    let mut adjusted = vec![false; counts.len()];
    loop {
        let total: usize = counts.iter().sum();
        if total == target {
            break;
        }
        // residual = exact - assigned; grow where most under-assigned, shrink where most over
        let pick = if total < target {
            (0..counts.len())
                .filter(|&c| !adjusted[c] && counts[c] < class_counts[c])
                .max_by(|&a, &b| (exact[a] - counts[a] as f64).total_cmp(&(exact[b] - counts[b] as f64)).then(b.cmp(&a)))
        } else {
            (0..counts.len())
                .filter(|&c| !adjusted[c] && counts[c] > 0)
                .min_by(|&a, &b| (exact[a] - counts[a] as f64).total_cmp(&(exact[b] - counts[b] as f64)).then(a.cmp(&b)))
        };
        let Some(c) = pick else { break };
        adjusted[c] = true;
        if total < target {
            counts[c] += 1;
        } else {
            counts[c] -= 1;
        }
    }
    counts
}

fn to_ppm(f: f64) -> u32 {
    (f * 1e6).round() as u32
}

/// Stratified holdout split, deterministic in `seed`.
pub fn stratified_split(
    labels: &[Label],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, PreprocessError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PreprocessError::BadFraction(test_fraction));
    }
    let mut members = class_members(labels);
    for (c, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(PreprocessError::ClassAbsent(c as Label));
        }
    }
    let counts = stratified_test_counts(&[members[0].len(), members[1].len()], test_fraction);
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (m, &take) in members.iter_mut().zip(&counts) {
        m.shuffle(&mut rng);
        test.extend_from_slice(&m[..take]);
        train.extend_from_slice(&m[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train,
        test,
        seed,
        test_fraction_ppm: to_ppm(test_fraction),
    })
}

/// `k` stratified folds. Within each class the shuffled members are dealt
/// round-robin, continuing the deal across classes, so fold sizes differ by
/// at most one and each fold's per-class count is within one of the others.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<SplitPlan>, PreprocessError> {
    if k < 2 {
        return Err(PreprocessError::BadFoldCount(k));
    }
    let mut members = class_members(labels);
    for (c, m) in members.iter().enumerate() {
        if m.len() < k {
            return Err(PreprocessError::ClassTooSmall {
                class: c as Label,
                have: m.len(),
                needed: k,
            });
        }
    }
    let mut rng = seeded(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut position = 0usize;
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
        for &i in m.iter() {
            fold_of[i] = position % k;
            position += 1;
        }
    }
    let plans = (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            SplitPlan {
                train,
                test,
                seed,
                test_fraction_ppm: to_ppm(1.0 / k as f64),
            }
        })
        .collect();
    Ok(plans)
}

/// Subject identifier of a recording name: everything before the last `_`
/// (`phon_R01_S01_3` -> `phon_R01_S01`).
pub fn subject_of(name: &str) -> &str {
    name.rsplit_once('_').map_or(name, |(s, _)| s)
}

/// Split that keeps every subject's recordings on one side. Not used by the
/// benchmark runs; provided for subject-level evaluation.
pub fn grouped_split(
    names: &[&str],
    labels: &[Label],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, PreprocessError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PreprocessError::BadFraction(test_fraction));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, n) in names.iter().enumerate() {
        groups.entry(subject_of(n)).or_default().push(i);
    }
    // majority label per group
    let mut by_class: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
    for rows in groups.into_values() {
        let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
        by_class[usize::from(2 * pos >= rows.len())].push(rows);
    }
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, groups) in by_class.iter_mut().enumerate() {
        if groups.is_empty() {
            return Err(PreprocessError::ClassAbsent(c as Label));
        }
        groups.shuffle(&mut rng);
        let size: usize = groups.iter().map(Vec::len).sum();
        let want = (size as f64 * test_fraction).round() as usize;
        let mut taken = 0;
        for g in groups.iter() {
            if taken < want {
                taken += g.len();
                test.extend_from_slice(g);
            } else {
                train.extend_from_slice(g);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train,
        test,
        seed,
        test_fraction_ppm: to_ppm(test_fraction),
    })
}
