//! L2-regularized binary logistic regression.
//!
//! Objective minimized by every solver, with `z = 2y - 1` and the intercept
//! left unpenalized:
//!
//! ```text
//! f(w, b) = Σ log(1 + exp(-z·(w·x + b))) + ‖w‖² / (2C)
//! ```
//!
//! Four solvers share that objective: damped exact-Hessian Newton, L-BFGS,
//! SAG and SAGA. Training stops once `‖∇f‖∞ <= tol`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};
use crate::linalg::{cholesky, cholesky_solve};
use crate::preprocess::SplitPlan;
use crate::rng::seeded;

#[derive(Debug, Error, PartialEq)]
pub enum LogRegError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("C must be positive and finite, got {0}")]
    BadC(f64),
    #[error("C grid is empty")]
    EmptyGrid,
    #[error("objective became non-finite")]
    Diverged,
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Newton,
    Lbfgs,
    Sag,
    Saga,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Newton, Solver::Lbfgs, Solver::Sag, Solver::Saga];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Newton => "newton",
            Solver::Lbfgs => "lbfgs",
            Solver::Sag => "sag",
            Solver::Saga => "saga",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = LogRegError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "newton" | "newton-cg" => Ok(Solver::Newton),
            "lbfgs" | "l-bfgs" => Ok(Solver::Lbfgs),
            "sag" => Ok(Solver::Sag),
            "saga" => Ok(Solver::Saga),
            _ => Err(LogRegError::UnknownSolver(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: Solver,
    /// Threshold on `‖∇f‖∞`.
    pub tol: f64,
    /// Newton/L-BFGS iterations, or SAG/SAGA epochs.
    pub max_iter: usize,
    pub seed: u64,
    pub lbfgs_memory: usize,
}

impl SolverConfig {
    pub fn new(solver: Solver) -> Self {
        let max_iter = match solver {
            Solver::Newton => 100,
            Solver::Lbfgs => 500,
            Solver::Sag | Solver::Saga => 5000,
        };
        SolverConfig {
            solver,
            tol: 1e-6,
            max_iter,
            seed: 0,
            lbfgs_memory: 10,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub solver: Solver,
    pub iterations: usize,
    #[serde(default)]
    pub objective: f64,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

/// Logistic loss problem over the augmented design `[x, 1]`.
pub struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    z: Vec<f64>,
    inv_c: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl<'a> Problem<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &[Label], c: f64) -> Self {
        Problem {
            x,
            z: y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect(),
            inv_c: 1.0 / c,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.x.ncols();
        let row = self.x.row(i);
        let mut m = theta[d];
        for j in 0..d {
            m += theta[j] * row[j];
        }
        m
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        let d = self.x.ncols();
        let loss: f64 = (0..self.x.nrows())
            .map(|i| softplus(-self.z[i] * self.margin(theta, i)))
            .sum();
        let reg: f64 = theta[..d].iter().map(|w| w * w).sum::<f64>() * 0.5 * self.inv_c;
        loss + reg
    }

    /// Derivative of sample `i`'s loss with respect to its margin.
    fn dloss(&self, theta: &[f64], i: usize) -> f64 {
        -self.z[i] * sigmoid(-self.z[i] * self.margin(theta, i))
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.x.ncols();
        let mut g = vec![0.0; d + 1];
        for i in 0..self.x.nrows() {
            let s = self.dloss(theta, i);
            let row = self.x.row(i);
            for j in 0..d {
                g[j] += s * row[j];
            }
            g[d] += s;
        }
        for j in 0..d {
            g[j] += theta[j] * self.inv_c;
        }
        g
    }

    pub fn hessian(&self, theta: &[f64]) -> Array2<f64> {
        let d = self.x.ncols();
        let mut h = Array2::<f64>::zeros((d + 1, d + 1));
        let mut xt = vec![0.0; d + 1];
        for i in 0..self.x.nrows() {
            let p = sigmoid(self.margin(theta, i));
            let w = p * (1.0 - p);
            let row = self.x.row(i);
            xt[..d].copy_from_slice(row.as_slice().unwrap_or(&row.to_vec()));
            xt[d] = 1.0;
            for a in 0..=d {
                let wa = w * xt[a];
                for b in 0..=a {
                    h[[a, b]] += wa * xt[b];
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                h[[b, a]] = h[[a, b]];
            }
        }
        for j in 0..d {
            h[[j, j]] += self.inv_c;
        }
        h
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_inputs(x: &FeatureMatrix, c: f64) -> Result<(), LogRegError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(LogRegError::BadC(c));
    }
    let [neg, pos] = x.class_counts();
    if neg == 0 || pos == 0 {
        return Err(LogRegError::SingleClass);
    }
    Ok(())
}

struct SolveResult {
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Trains on `x` (features) and `x.labels()`.
pub fn train_logreg(x: &FeatureMatrix, c: f64, cfg: &SolverConfig) -> Result<LogRegModel, LogRegError> {
    check_inputs(x, c)?;
    let problem = Problem::new(x.values(), x.labels(), c);
    let res = match cfg.solver {
        Solver::Newton => newton(&problem, cfg),
        Solver::Lbfgs => lbfgs(&problem, cfg),
        Solver::Sag => stochastic_average(&problem, cfg, false),
        Solver::Saga => stochastic_average(&problem, cfg, true),
    }?;
    let objective = problem.objective(&res.theta);
    if !objective.is_finite() || res.theta.iter().any(|v| !v.is_finite()) {
        return Err(LogRegError::Diverged);
    }
    if !res.converged {
        log::debug!(
            "{} did not reach tol {} in {} iterations (C = {c})",
            cfg.solver,
            cfg.tol,
            res.iterations
        );
    }
    let d = x.n_cols();
    Ok(LogRegModel {
        weights: res.theta[..d].to_vec(),
        intercept: res.theta[d],
        c,
        solver: cfg.solver,
        iterations: res.iterations,
        objective,
        converged: res.converged,
    })
}

/// Armijo backtracking along `dir` from `theta`. Returns the accepted point
/// and its objective, or `None` if no decrease was found.
fn backtrack(problem: &Problem<'_>, theta: &[f64], f0: f64, g: &[f64], dir: &[f64]) -> Option<(Vec<f64>, f64)> {
    let slope: f64 = g.iter().zip(dir).map(|(a, b)| a * b).sum();
    if slope >= 0.0 {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let cand: Vec<f64> = theta.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        let f = problem.objective(&cand);
        if f <= f0 + 1e-4 * t * slope {
            return Some((cand, f));
        }
        t *= 0.5;
    }
    None
}

fn newton(problem: &Problem<'_>, cfg: &SolverConfig) -> Result<SolveResult, LogRegError> {
    let n = problem.dim();
    let mut theta = vec![0.0; n];
    let mut f = problem.objective(&theta);
    for it in 0..cfg.max_iter {
        let g = problem.gradient(&theta);
        if inf_norm(&g) <= cfg.tol {
            return Ok(SolveResult {
                theta,
                iterations: it,
                converged: true,
            });
        }
        let mut h = problem.hessian(&theta);
        // singular Hessian (separable data, collinear columns): add a ridge until it factors
        let mut ridge = 0.0;
        let l = loop {
            if let Some(l) = cholesky(h.view()) {
                break l;
            }
            let bump = if ridge == 0.0 { 1e-10 } else { ridge * 10.0 };
            for j in 0..n {
                h[[j, j]] += bump - ridge;
            }
            ridge = bump;
            if ridge > 1e10 {
                return Err(LogRegError::Diverged);
            }
        };
        let step = cholesky_solve(&l, &Array1::from(g.clone()));
        let dir: Vec<f64> = step.iter().map(|v| -v).collect();
        match backtrack(problem, &theta, f, &g, &dir) {
            Some((next, fnext)) => {
                theta = next;
                f = fnext;
            }
            None => {
                // no representable decrease left
                let g = problem.gradient(&theta);
                return Ok(SolveResult {
                    converged: inf_norm(&g) <= cfg.tol,
                    theta,
                    iterations: it + 1,
                });
            }
        }
    }
    let g = problem.gradient(&theta);
    Ok(SolveResult {
        converged: inf_norm(&g) <= cfg.tol,
        theta,
        iterations: cfg.max_iter,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs(problem: &Problem<'_>, cfg: &SolverConfig) -> Result<SolveResult, LogRegError> {
    let n = problem.dim();
    let m = cfg.lbfgs_memory.max(1);
    let mut theta = vec![0.0; n];
    let mut f = problem.objective(&theta);
    let mut g = problem.gradient(&theta);
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rho_hist: Vec<f64> = Vec::with_capacity(m);
    for it in 0..cfg.max_iter {
        if inf_norm(&g) <= cfg.tol {
            return Ok(SolveResult {
                theta,
                iterations: it,
                converged: true,
            });
        }
        // two-loop recursion
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
            for j in 0..n {
                q[j] -= alpha[i] * y_hist[i][j];
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / inf_norm(&g).max(1.0)
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            for j in 0..n {
                q[j] += s_hist[i][j] * (alpha[i] - beta);
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            // lost descent; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
        }
        let Some((next, fnext)) = backtrack(problem, &theta, f, &g, &dir) else {
            return Ok(SolveResult {
                converged: inf_norm(&g) <= cfg.tol,
                theta,
                iterations: it + 1,
            });
        };
        let gnext = problem.gradient(&next);
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if s_hist.len() == m {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }
        theta = next;
        f = fnext;
        g = gnext;
    }
    Ok(SolveResult {
        converged: inf_norm(&g) <= cfg.tol,
        theta,
        iterations: cfg.max_iter,
    })
}

/// Step size `1/L` with `L = 0.25·maxᵢ‖x̃ᵢ‖² + 1/C`, `x̃ = [x, 1]`.
pub fn sag_step_size(x: ArrayView2<'_, f64>, c: f64) -> f64 {
    let max_sq = x
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    1.0 / (0.25 * max_sq + 1.0 / c)
}

/// SAG (biased, averaged stored gradients) or SAGA (unbiased correction).
///
/// Works on the averaged objective `f / n`, storing one scalar margin
/// derivative per sample. Convergence is checked on the full gradient of
/// `f` once per epoch.
fn stochastic_average(problem: &Problem<'_>, cfg: &SolverConfig, saga: bool) -> Result<SolveResult, LogRegError> {
    let x = problem.x;
    let n = x.nrows();
    let d = x.ncols();
    let lambda = problem.inv_c / n as f64;
    let step = sag_step_size(x, 1.0 / problem.inv_c);
    let mut rng = seeded(cfg.seed);
    let mut theta = vec![0.0; d + 1];
    let mut stored = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut n_seen = 0usize;
    let mut sum = vec![0.0; d + 1];
    for epoch in 0..cfg.max_iter {
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            let row = x.row(i);
            let new = problem.dloss(&theta, i);
            let delta = new - stored[i];
            if !seen[i] {
                seen[i] = true;
                n_seen += 1;
            }
            if saga {
                // θ -= η (Δ·x̃ᵢ + S/n + λw), then fold Δ into S
                for j in 0..d {
                    let gj = delta * row[j] + sum[j] / n as f64 + lambda * theta[j];
                    theta[j] -= step * gj;
                }
                theta[d] -= step * (delta + sum[d] / n as f64);
                accumulate(&mut sum, row, delta);
            } else {
                accumulate(&mut sum, row, delta);
                let denom = n_seen as f64;
                for j in 0..d {
                    theta[j] -= step * (sum[j] / denom + lambda * theta[j]);
                }
                theta[d] -= step * sum[d] / denom;
            }
            stored[i] = new;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(LogRegError::Diverged);
        }
        let g = problem.gradient(&theta);
        if inf_norm(&g) <= cfg.tol {
            return Ok(SolveResult {
                theta,
                iterations: epoch + 1,
                converged: true,
            });
        }
    }
    Ok(SolveResult {
        theta,
        iterations: cfg.max_iter,
        converged: false,
    })
}

fn accumulate(sum: &mut [f64], row: ArrayView1<'_, f64>, delta: f64) {
    let d = row.len();
    for j in 0..d {
        sum[j] += delta * row[j];
    }
    sum[d] += delta;
}

impl LogRegModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, LogRegError> {
        if x.ncols() != self.weights.len() {
            return Err(LogRegError::DimensionMismatch {
                expected: self.weights.len(),
                got: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|r| r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept)
            .collect())
    }

    /// Probabilities `σ(w·x + b)` and labels (`p >= 0.5`).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<Label>), LogRegError> {
        let probs: Vec<f64> = self.decision_function(x)?.into_iter().map(sigmoid).collect();
        let labels = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        Ok((probs, labels))
    }

    /// The training objective evaluated at this model on `(x, y)`.
    pub fn objective_on(&self, x: &FeatureMatrix) -> f64 {
        let problem = Problem::new(x.values(), x.labels(), self.c);
        let mut theta = self.weights.clone();
        theta.push(self.intercept);
        problem.objective(&theta)
    }
}

pub fn predict_logreg(m: &LogRegModel, x: &FeatureMatrix) -> Result<(Vec<f64>, Vec<Label>), LogRegError> {
    m.predict(x.values())
}

/// One row of a cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub c: f64,
    /// `None` marks a fold whose training failed.
    pub fold_accuracy: Vec<Option<f64>>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSelection {
    pub chosen_c: f64,
    pub table: Vec<CvRow>,
}

/// Picks the C with the highest mean fold accuracy; ties go to the larger C.
/// Fold indices address rows of `x`.
pub fn select_c(
    x: &FeatureMatrix,
    grid: &[f64],
    cfg: &SolverConfig,
    folds: &[SplitPlan],
) -> Result<CvSelection, LogRegError> {
    if grid.is_empty() {
        return Err(LogRegError::EmptyGrid);
    }
    let mut table = Vec::with_capacity(grid.len());
    for &c in grid {
        let fold_accuracy: Vec<Option<f64>> = folds
            .iter()
            .map(|fold| {
                let train = x.select_rows(&fold.train);
                let test = x.select_rows(&fold.test);
                let model = train_logreg(&train, c, cfg).ok()?;
                let (_, pred) = model.predict(test.values()).ok()?;
                let correct = pred.iter().zip(test.labels()).filter(|(a, b)| a == b).count();
                Some(correct as f64 / test.n_rows() as f64)
            })
            .collect();
        let ok: Vec<f64> = fold_accuracy.iter().flatten().copied().collect();
        let mean_accuracy = if ok.is_empty() {
            f64::NEG_INFINITY
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        };
        table.push(CvRow {
            c,
            fold_accuracy,
            mean_accuracy,
        });
    }
    let best = table
        .iter()
        .max_by(|a, b| {
            if (a.mean_accuracy - b.mean_accuracy).abs() <= 1e-12 {
                a.c.total_cmp(&b.c)
            } else {
                a.mean_accuracy.total_cmp(&b.mean_accuracy)
            }
        })
        .expect("non-empty grid");
    Ok(CvSelection {
        chosen_c: best.c,
        table,
    })
}
