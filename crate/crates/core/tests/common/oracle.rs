//! Independent reference computations. Each one is written from the
//! mathematical definition, shares no code with the library beyond input
//! types, and returns the worst discrepancy it observed.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use pdbench::linear_models::{train_logreg, Problem, Solver, SolverConfig};
use pdbench::neural::{gradient_check, NetKind, NeuralSpec};
use pdbench::preprocess::fit_pca;
use pdbench::svm::{kernel_matrix, smo_solve, Kernel};
use pdbench::tree_ensembles::{best_gini_split, train_gbdt, BoostStyle, GbdtParams, TreeNode};
use pdbench::{FeatureMatrix, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled points with both classes present.
fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Array2<f64>, Vec<Label>) {
    loop {
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
        let y: Vec<Label> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        if y.contains(&0) && y.contains(&1) {
            return (x, y);
        }
    }
}

fn dual_value(q: &DMatrix<f64>, alpha: &DVector<f64>) -> f64 {
    alpha.sum() - 0.5 * (alpha.transpose() * q * alpha)[(0, 0)]
}

/// Maximum of the SVM dual by enumerating every assignment of each
/// multiplier to {0, C, free} and solving the equality-constrained KKT
/// system on the free set. Feasible for n ≤ 8 (3⁸ systems).
pub fn qp_dual_optimum(k: &Array2<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[[i, j]]);
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        let bound_balance: f64 = (0..n).filter(|&i| state[i] != 2).map(|i| y[i] * alpha[i]).sum();
        if free.is_empty() {
            if bound_balance.abs() > 1e-12 {
                continue;
            }
        } else {
            // [Q_FF  y_F] [α_F]   [1 - Q_FB α_B]
            // [y_Fᵀ  0  ] [ ν ] = [  -y_Bᵀ α_B  ]
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut b = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] != 2).map(|j| q[(i, j)] * alpha[j]).sum();
                b[r] = 1.0 - fixed;
            }
            b[m] = -bound_balance;
            let Some(sol) = a.lu().solve(&b) else { continue };
            if free.iter().enumerate().any(|(r, _)| !(sol[r] >= -1e-10 && sol[r] <= c + 1e-10)) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r].clamp(0.0, c);
            }
        }
        best = best.max(dual_value(&q, &alpha));
    }
    best
}

/// Largest |SMO objective − exhaustive optimum| over random RBF problems
/// with 2 ≤ n ≤ 8.
pub fn smo_vs_exhaustive(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let n = 2 + t % 7;
        let (x, labels) = random_points(&mut r, n, 2);
        let c = [0.1, 1.0, 10.0][t % 3];
        let kernel = if t % 2 == 0 { Kernel::rbf(0.7) } else { Kernel::linear() };
        let k = kernel_matrix(x.view(), &kernel);
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let sol = smo_solve(&k, &y, c, 1e-10, 100_000, |_| {});
        let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[[i, j]]);
        let smo_value = dual_value(&q, &DVector::from_vec(sol.alpha.clone()));
        worst = worst.max((smo_value - qp_dual_optimum(&k, &y, c)).abs());
    }
    worst
}

/// Largest relative error between the analytic logistic gradient and
/// central differences.
pub fn logistic_gradient_error(instances: usize, seed: u64) -> f64 {
    const H: f64 = 1e-5;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = r.gen_range(5..30);
        let d = r.gen_range(1..6);
        let (x, y) = random_points(&mut r, n, d);
        let c = 10f64.powf(r.gen_range(-2.0..2.0));
        let p = Problem::new(x.view(), &y, c);
        let mut theta: Vec<f64> = (0..d + 1).map(|_| r.gen_range(-1.5..1.5)).collect();
        let g = p.gradient(&theta);
        for j in 0..theta.len() {
            let orig = theta[j];
            theta[j] = orig + H;
            let up = p.objective(&theta);
            theta[j] = orig - H;
            let down = p.objective(&theta);
            theta[j] = orig;
            let numeric = (up - down) / (2.0 * H);
            let rel = (g[j] - numeric).abs() / g[j].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Final objective of each solver at `c`, tightly converged.
pub fn solver_objectives(train: &FeatureMatrix, c: f64) -> Vec<(Solver, f64)> {
    [Solver::Newton, Solver::Lbfgs, Solver::Sag, Solver::Saga]
        .into_iter()
        .map(|s| {
            let cfg = SolverConfig::new(s).with_tol(1e-8).with_max_iter(match s {
                Solver::Newton | Solver::Lbfgs => 1000,
                Solver::Sag | Solver::Saga => 20_000,
            });
            let m = train_logreg(train, c, &cfg).expect("solver runs");
            let mut theta = m.weights.clone();
            theta.push(m.intercept);
            (s, Problem::new(train.values(), train.labels(), c).objective(&theta))
        })
        .collect()
}

pub fn spread(values: &[(Solver, f64)]) -> f64 {
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// One depth-1 regression stump per round on the logistic loss, with
/// Newton leaf values.
#[derive(Debug, Clone, Copy)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

/// Boosting by exhaustive stump enumeration: the split maximizes the drop
/// in squared error of the residuals `y - p`, each leaf moves by
/// `rate · Σr / Σp(1-p)`.
pub fn stump_boosting(x: ArrayView2<'_, f64>, y: &[Label], rounds: usize, rate: f64) -> (f64, Vec<Stump>) {
    let n = y.len();
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let base = (pos / (n as f64 - pos)).ln();
    let mut f = vec![base; n];
    let mut stumps = Vec::new();
    for _ in 0..rounds {
        let p: Vec<f64> = f.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let r: Vec<f64> = (0..n).map(|i| f64::from(y[i]) - p[i]).collect();
        let sse = |rows: &[usize]| {
            if rows.is_empty() {
                return 0.0;
            }
            let m = rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64;
            rows.iter().map(|&i| (r[i] - m).powi(2)).sum::<f64>()
        };
        let all: Vec<usize> = (0..n).collect();
        let parent = sse(&all);
        let mut best: Option<(f64, usize, f64)> = None;
        for feat in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(feat).to_vec();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, rr): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, feat]] <= t);
                let gain = parent - sse(&l) - sse(&rr);
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0 + 1e-12) {
                    best = Some((gain, feat, t));
                }
            }
        }
        let (_, feature, threshold) = best.expect("generic data always admits a split");
        let leaf = |side: bool| {
            let rows: Vec<usize> = all.iter().copied().filter(|&i| (x[[i, feature]] <= threshold) == side).collect();
            let num: f64 = rows.iter().map(|&i| r[i]).sum();
            let den: f64 = rows.iter().map(|&i| p[i] * (1.0 - p[i])).sum();
            rate * num / den
        };
        let stump = Stump {
            feature,
            threshold,
            left: leaf(true),
            right: leaf(false),
        };
        for i in 0..n {
            f[i] += if x[[i, feature]] <= threshold { stump.left } else { stump.right };
        }
        stumps.push(stump);
    }
    (base, stumps)
}

/// The fixed 12-point, two-feature set used for the stump comparison.
pub fn twelve_points() -> FeatureMatrix {
    let x = ndarray::array![
        [0.31, 2.7],
        [1.12, 0.4],
        [1.94, 1.9],
        [2.53, 3.3],
        [3.08, 0.9],
        [3.71, 2.2],
        [4.26, 4.1],
        [4.89, 1.3],
        [5.47, 3.6],
        [6.02, 0.2],
        [6.66, 2.9],
        [7.35, 4.6]
    ];
    let y = vec![0, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1, 1];
    FeatureMatrix::from_values(x, y).expect("well formed")
}

/// Largest difference between the library's classic booster (depth 1) and
/// the stump oracle, over base score, thresholds and leaf values. Returns
/// `f64::INFINITY` if a chosen feature differs.
pub fn classic_vs_stumps(rounds: usize, rate: f64) -> f64 {
    let data = twelve_points();
    let (base, stumps) = stump_boosting(data.values(), data.labels(), rounds, rate);
    let m = train_gbdt(&data, &GbdtParams::new(BoostStyle::Classic, rounds, rate, 1)).expect("trains");
    let mut worst = (m.base_score - base).abs();
    for (tree, s) in m.trees.iter().zip(&stumps) {
        match tree {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature != s.feature {
                    return f64::INFINITY;
                }
                let (TreeNode::Leaf { leaf: l }, TreeNode::Leaf { leaf: r }) = (left.as_ref(), right.as_ref()) else {
                    return f64::INFINITY;
                };
                worst = worst.max((threshold - s.threshold).abs()).max((l - s.left).abs()).max((r - s.right).abs());
            }
            TreeNode::Leaf { .. } => return f64::INFINITY,
        }
    }
    if m.trees.len() != stumps.len() {
        return f64::INFINITY;
    }
    worst
}

/// Largest |library gain − best enumerated gain| over random 10-point sets.
/// Gini impurity here is `1 - p₀² - p₁²`.
pub fn gini_vs_enumeration(instances: usize, seed: u64) -> f64 {
    let impurity = |rows: &[usize], y: &[Label]| {
        if rows.is_empty() {
            return 0.0;
        }
        let p = rows.iter().filter(|&&i| y[i] == 1).count() as f64 / rows.len() as f64;
        1.0 - p * p - (1.0 - p) * (1.0 - p)
    };
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let d = 1 + t % 3;
        // coarse values so that ties occur
        let x = Array2::from_shape_fn((10, d), |_| f64::from(r.gen_range(0..6)));
        let y: Vec<Label> = (0..10).map(|_| u8::from(r.gen_bool(0.5))).collect();
        let all: Vec<usize> = (0..10).collect();
        let parent = impurity(&all, &y);
        let mut best: Option<f64> = None;
        for f in 0..d {
            let mut vals: Vec<f64> = x.column(f).to_vec();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, rr): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, f]] <= t);
                let gain = parent - (l.len() as f64 * impurity(&l, &y) + rr.len() as f64 * impurity(&rr, &y)) / 10.0;
                best = Some(best.map_or(gain, |b: f64| b.max(gain)));
            }
        }
        let features: Vec<usize> = (0..d).collect();
        let got = best_gini_split(x.view(), &y, &all, &features, 1);
        match (best, got) {
            (None, None) => {}
            (Some(b), Some(g)) => {
                worst = worst.max((b - g.gain).abs());
                // the reported gain must also match the split it names
                let (l, rr): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, g.feature]] <= g.threshold);
                let named = parent - (l.len() as f64 * impurity(&l, &y) + rr.len() as f64 * impurity(&rr, &y)) / 10.0;
                worst = worst.max((named - g.gain).abs());
            }
            _ => return f64::INFINITY,
        }
    }
    worst
}

/// Worst relative gradient error per architecture on the first `rows`
/// rows of `x`.
pub fn neural_gradient_checks(x: &FeatureMatrix, rows: usize) -> Vec<(NetKind, f64)> {
    let idx: Vec<usize> = (0..rows.min(x.n_rows())).collect();
    let sub = x.select_rows(&idx);
    [NetKind::Fnn, NetKind::Rnn, NetKind::Lstm]
        .into_iter()
        .map(|kind| {
            let hidden = match kind {
                NetKind::Fnn => vec![6, 4],
                _ => vec![5],
            };
            let spec = NeuralSpec {
                hidden,
                ..NeuralSpec::default_for(kind)
            };
            (kind, gradient_check(&spec, &sub).expect("valid spec"))
        })
        .collect()
}

/// Largest eigenvalue difference between the library's PCA and nalgebra's
/// symmetric eigensolver on the sample covariance of `x`, together with
/// the largest `1 - |cos|` between matching retained components.
pub fn pca_vs_nalgebra(x: &FeatureMatrix) -> (f64, f64) {
    let (n, d) = (x.n_rows(), x.n_cols());
    let v = x.values();
    let means: Vec<f64> = (0..d).map(|j| v.column(j).sum() / n as f64).collect();
    let cov = DMatrix::from_fn(d, d, |a, b| {
        (0..n).map(|i| (v[[i, a]] - means[a]) * (v[[i, b]] - means[b])).sum::<f64>() / (n as f64 - 1.0)
    });
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pca = fit_pca(x, 0.95).expect("pca fits");
    let mut value_err: f64 = 0.0;
    for (r, &o) in order.iter().enumerate() {
        value_err = value_err.max((pca.eigenvalues[r] - eig.eigenvalues[o]).abs());
    }
    let mut angle_err: f64 = 0.0;
    for r in 0..pca.k {
        let col = eig.eigenvectors.column(order[r]);
        let dot: f64 = (0..d).map(|j| pca.components[[r, j]] * col[j]).sum();
        angle_err = angle_err.max(1.0 - dot.abs());
    }
    (value_err, angle_err)
}
