//! Binary C-SVM trained by sequential minimal optimization.
//!
//! The dual is
//!
//! ```text
//! max  Σαᵢ − ½ ΣᵢΣⱼ αᵢαⱼ yᵢyⱼ K(xᵢ, xⱼ)
//! s.t. 0 <= αᵢ <= C,  Σ αᵢyᵢ = 0
//! ```
//!
//! Each step picks the maximal KKT-violating pair and solves the two-variable
//! subproblem in closed form. The full kernel matrix is cached up front.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};

pub const DEFAULT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("C must be positive and finite, got {0}")]
    BadC(f64),
    #[error("invalid kernel: {0}")]
    BadKernel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Poly,
    Rbf,
    Sigmoid,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [KernelKind::Linear, KernelKind::Poly, KernelKind::Rbf, KernelKind::Sigmoid];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Poly => "poly",
            KernelKind::Rbf => "rbf",
            KernelKind::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = SvmError;

    fn from_str(s: &str) -> Result<Self, SvmError> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "poly" | "polynomial" => Ok(KernelKind::Poly),
            "rbf" => Ok(KernelKind::Rbf),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            _ => Err(SvmError::BadKernel(format!("unknown kernel `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl Kernel {
    pub fn linear() -> Self {
        Kernel {
            kind: KernelKind::Linear,
            gamma: 1.0,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        Kernel {
            kind: KernelKind::Rbf,
            gamma,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn poly(gamma: f64, degree: u32, coef0: f64) -> Self {
        Kernel {
            kind: KernelKind::Poly,
            gamma,
            degree,
            coef0,
        }
    }

    pub fn sigmoid(gamma: f64, coef0: f64) -> Self {
        Kernel {
            kind: KernelKind::Sigmoid,
            gamma,
            degree: 1,
            coef0,
        }
    }

    /// Kernel of the given kind with default shape parameters
    /// (degree 3, coef0 0) and the supplied gamma.
    pub fn with_defaults(kind: KernelKind, gamma: f64) -> Self {
        match kind {
            KernelKind::Linear => Kernel::linear(),
            KernelKind::Poly => Kernel::poly(gamma, 3, 0.0),
            KernelKind::Rbf => Kernel::rbf(gamma),
            KernelKind::Sigmoid => Kernel::sigmoid(gamma, 0.0),
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvmError::BadKernel(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.degree < 1 {
            return Err(SvmError::BadKernel("degree must be >= 1".into()));
        }
        Ok(())
    }

    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self.kind {
            KernelKind::Linear => a.dot(&b),
            KernelKind::Poly => (self.gamma * a.dot(&b) + self.coef0).powi(self.degree as i32),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Sigmoid => (self.gamma * a.dot(&b) + self.coef0).tanh(),
        }
    }
}

pub fn kernel_eval(k: &Kernel, a: &[f64], b: &[f64]) -> Result<f64, SvmError> {
    if a.len() != b.len() {
        return Err(SvmError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(k.eval(ArrayView1::from(a), ArrayView1::from(b)))
}

/// `1 / (d · mean per-column population variance)` of the training matrix.
pub fn gamma_scale(x: ArrayView2<'_, f64>) -> f64 {
    let d = x.ncols();
    let var = x.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢyᵢ` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub dual_objective: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

/// Full solver state, exposed for inspection in tests and diagnostics.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// ±1 labels.
    pub y: Vec<f64>,
    pub bias: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn signed_labels(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

pub fn kernel_matrix(x: ArrayView2<'_, f64>, k: &Kernel) -> Array2<f64> {
    let n = x.nrows();
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval(x.row(i), x.row(j));
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

/// SMO on a precomputed kernel matrix. `observe` sees `α` after every update.
pub fn smo_solve(
    kmat: &Array2<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kmat[[i, j]];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let mut i_sel = usize::MAX;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && v > gmax {
                gmax = v;
                i_sel = t;
            }
            if low && v < gmin {
                gmin = v;
                j_sel = t;
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for t in 0..n {
            grad[t] += q(t, i) * dai + q(t, j) * daj;
        }
        observe(&alpha);
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let dual_objective = alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>() * 0.5;
    SmoSolution {
        alpha,
        y: y.to_vec(),
        bias: -rho,
        dual_objective,
        iterations,
        converged,
    }
}

/// Dual objective `Σα − ½αᵀQα` evaluated directly.
pub fn dual_objective(kmat: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kmat[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn check(x: &FeatureMatrix, c: f64, kernel: &Kernel) -> Result<(), SvmError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SvmError::BadC(c));
    }
    kernel.validate()?;
    let [neg, pos] = x.class_counts();
    if neg == 0 || pos == 0 {
        return Err(SvmError::SingleClass);
    }
    Ok(())
}

/// Solves the dual and returns the full solution alongside the model.
pub fn train_svm_detailed(
    x: &FeatureMatrix,
    c: f64,
    kernel: Kernel,
    tol: f64,
) -> Result<(SvmModel, SmoSolution), SvmError> {
    check(x, c, &kernel)?;
    let kmat = kernel_matrix(x.values(), &kernel);
    let y = signed_labels(x.labels());
    let max_iter = 100 * x.n_rows().max(10);
    let sol = smo_solve(&kmat, &y, c, tol, max_iter, |_| {});
    if !sol.converged {
        log::debug!("SMO hit the iteration cap ({max_iter}) before reaching tol {tol}");
    }
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x.row(i).to_vec());
            dual_coefs.push(a * y[i]);
        }
    }
    let model = SvmModel {
        kernel,
        support_vectors,
        dual_coefs,
        bias: sol.bias,
        c,
        dual_objective: sol.dual_objective,
        iterations: sol.iterations,
        converged: sol.converged,
    };
    Ok((model, sol))
}

pub fn train_svm(x: &FeatureMatrix, c: f64, kernel: Kernel, tol: f64) -> Result<SvmModel, SvmError> {
    train_svm_detailed(x, c, kernel, tol).map(|(m, _)| m)
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, SvmError> {
        let d = self.n_features();
        if !self.support_vectors.is_empty() && x.ncols() != d {
            return Err(SvmError::DimensionMismatch {
                expected: d,
                got: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                self.support_vectors
                    .iter()
                    .zip(&self.dual_coefs)
                    .map(|(sv, &coef)| coef * self.kernel.eval(ArrayView1::from(sv.as_slice()), row))
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    /// Decision values and labels (`f(x) >= 0` → 1).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<Label>), SvmError> {
        let f = self.decision_function(x)?;
        let labels = f.iter().map(|&v| u8::from(v >= 0.0)).collect();
        Ok((f, labels))
    }
}

pub fn predict_svm(m: &SvmModel, x: &FeatureMatrix) -> Result<(Vec<f64>, Vec<Label>), SvmError> {
    m.predict(x.values())
}
