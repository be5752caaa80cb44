//! Decision trees, random forests, and gradient-boosted trees.
//!
//! One boosting engine covers four styles:
//!
//! - `classic`: trees fit to the negative gradient by variance reduction,
//!   leaf value is a one-step Newton estimate `Σr / Σp(1-p)`.
//! - `second_order`: gain and leaf values from per-leaf gradient/hessian
//!   sums with an L2 leaf penalty, `-G / (H + λ)`.
//! - `histogram`: the `second_order` math with split search restricted to
//!   quantile bin edges computed once from the training data.
//! - `oblivious`: symmetric trees, one (feature, threshold) pair shared by
//!   every node of a depth level.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("no training rows")]
    Empty,
    #[error("learning rate must be finite and >= 0, got {0}")]
    BadLearningRate(f64),
    #[error("unknown boosting style `{0}`")]
    UnknownStyle(String),
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf: f64,
    },
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode::Leaf { leaf: value }
    }

    pub fn value(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf } => return *leaf,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Index of the leaf reached by `row`, counting leaves left to right.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        fn walk(node: &TreeNode, row: &[f64], offset: usize) -> usize {
            match node {
                TreeNode::Leaf { .. } => offset,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if row[*feature] <= *threshold {
                        walk(left, row, offset)
                    } else {
                        walk(right, row, offset + left.n_leaves())
                    }
                }
            }
        }
        walk(self, row, 0)
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, left, right, .. } => Some(
                (*feature)
                    .max(left.max_feature_index().unwrap_or(0))
                    .max(right.max_feature_index().unwrap_or(0)),
            ),
        }
    }

    /// Splits grouped by depth level, left to right.
    pub fn splits_by_level(&self) -> Vec<Vec<(usize, f64)>> {
        let mut levels: Vec<Vec<(usize, f64)>> = Vec::new();
        fn walk(node: &TreeNode, depth: usize, levels: &mut Vec<Vec<(usize, f64)>>) {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = node
            {
                if levels.len() <= depth {
                    levels.push(Vec::new());
                }
                levels[depth].push((*feature, *threshold));
                walk(left, depth + 1, levels);
                walk(right, depth + 1, levels);
            }
        }
        walk(self, 0, &mut levels);
        levels
    }

    fn scale_leaves(&mut self, factor: f64) {
        match self {
            TreeNode::Leaf { leaf } => *leaf *= factor,
            TreeNode::Split { left, right, .. } => {
                left.scale_leaves(factor);
                right.scale_leaves(factor);
            }
        }
    }
}

/// Gini impurity of a node with `pos` positives out of `n`.
pub fn gini(pos: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until purity or `min_samples_leaf`.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// Best split of one node. Ties keep the lowest feature index, then the
/// lowest threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn row_of(x: ArrayView2<'_, f64>, i: usize) -> Vec<f64> {
    x.row(i).to_vec()
}

/// Gini-gain split search over `features` for the rows `idx`.
pub fn best_gini_split(
    x: ArrayView2<'_, f64>,
    y: &[Label],
    idx: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| y[i] == 1).count() as f64;
    let parent = gini(total_pos, n as f64);
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        let mut left_pos = 0.0;
        for k in 0..n - 1 {
            if y[order[k]] == 1 {
                left_pos += 1.0;
            }
            let lo = x[[order[k], f]];
            let hi = x[[order[k + 1], f]];
            if lo >= hi {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            if (k + 1) < min_samples_leaf || (n - k - 1) < min_samples_leaf {
                continue;
            }
            let child = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n as f64;
            let gain = parent - child;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    // guard against rounding onto the upper value
    if m >= hi {
        lo
    } else {
        m
    }
}

fn leaf_probability(y: &[Label], idx: &[usize]) -> f64 {
    idx.iter().filter(|&&i| y[i] == 1).count() as f64 / idx.len() as f64
}

/// Greedy CART classification tree. Leaves hold the fraction of class 1.
pub fn train_tree(
    x: ArrayView2<'_, f64>,
    y: &[Label],
    params: &TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<TreeNode, TreeError> {
    if y.is_empty() {
        return Err(TreeError::Empty);
    }
    let idx: Vec<usize> = (0..y.len()).collect();
    let mut rng = rng;
    Ok(grow_gini(x, y, &idx, 0, params, &mut rng))
}

fn grow_gini(
    x: ArrayView2<'_, f64>,
    y: &[Label],
    idx: &[usize],
    depth: usize,
    params: &TreeParams,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> TreeNode {
    let p = leaf_probability(y, idx);
    let at_depth = params.max_depth.is_some_and(|m| depth >= m);
    if at_depth || p == 0.0 || p == 1.0 || idx.len() < 2 * params.min_samples_leaf.max(1) {
        return TreeNode::leaf(p);
    }
    let d = x.ncols();
    let features: Vec<usize> = match (params.max_features, rng.as_deref_mut()) {
        (Some(m), Some(r)) if m < d => {
            let mut f = sample(r, d, m).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    };
    let Some(split) = best_gini_split(x, y, idx, &features, params.min_samples_leaf.max(1)) else {
        return TreeNode::leaf(p);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[[i, split.feature]] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow_gini(x, y, &l, depth + 1, params, rng)),
        right: Box::new(grow_gini(x, y, &r, depth + 1, params, rng)),
    }
}

pub fn tree_predict_class(tree: &TreeNode, row: &[f64]) -> Label {
    u8::from(tree.value(row) >= 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(n_estimators: usize, max_depth: Option<usize>, seed: u64) -> Self {
        ForestParams {
            n_estimators,
            max_depth,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub tree_seeds: Vec<u64>,
    pub max_features: usize,
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub n_features: usize,
}

/// Bootstrap sample of `n` row indices drawn with replacement.
pub fn bootstrap_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Random forest: bootstrap rows per tree, `max_features` candidates per
/// split. Tree `t` draws from the seed `derive_seed(seed, t)`.
pub fn train_forest(x: &FeatureMatrix, params: &ForestParams) -> Result<ForestModel, TreeError> {
    let [neg, pos] = x.class_counts();
    if neg + pos == 0 {
        return Err(TreeError::Empty);
    }
    if neg == 0 || pos == 0 {
        return Err(TreeError::SingleClass);
    }
    let d = x.n_cols();
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
        .clamp(1, d);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(max_features),
    };
    let values = x.values();
    let labels = x.labels();
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut tree_seeds = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let seed = derive_seed(params.seed, t as u64);
        let mut rng = seeded(seed);
        let idx: Vec<usize> = if params.bootstrap {
            bootstrap_indices(x.n_rows(), &mut rng)
        } else {
            (0..x.n_rows()).collect()
        };
        let root = grow_gini(values, labels, &idx, 0, &tree_params, &mut Some(&mut rng));
        trees.push(root);
        tree_seeds.push(seed);
    }
    Ok(ForestModel {
        trees,
        tree_seeds,
        max_features,
        n_estimators: params.n_estimators,
        max_depth: params.max_depth,
        bootstrap: params.bootstrap,
        n_features: d,
    })
}

impl ForestModel {
    /// Fraction of trees voting for class 1, and the majority label
    /// (ties go to class 1).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<Label>), TreeError> {
        if x.ncols() != self.n_features {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let mut votes = Vec::with_capacity(x.nrows());
        let mut labels = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let row = row_of(x, i);
            let ones = self.trees.iter().filter(|t| tree_predict_class(t, &row) == 1).count();
            let total = self.trees.len().max(1);
            votes.push(ones as f64 / total as f64);
            labels.push(u8::from(2 * ones >= total));
        }
        Ok((votes, labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostStyle {
    Classic,
    SecondOrder,
    Histogram,
    Oblivious,
}

impl BoostStyle {
    pub const ALL: [BoostStyle; 4] = [
        BoostStyle::Classic,
        BoostStyle::SecondOrder,
        BoostStyle::Histogram,
        BoostStyle::Oblivious,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoostStyle::Classic => "classic",
            BoostStyle::SecondOrder => "second_order",
            BoostStyle::Histogram => "histogram",
            BoostStyle::Oblivious => "oblivious",
        }
    }
}

impl fmt::Display for BoostStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoostStyle {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, TreeError> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "classic" | "gbm" => Ok(BoostStyle::Classic),
            "second_order" | "xgb" | "xgboost" => Ok(BoostStyle::SecondOrder),
            "histogram" | "lgbm" | "lightgbm" => Ok(BoostStyle::Histogram),
            "oblivious" | "catboost" => Ok(BoostStyle::Oblivious),
            _ => Err(TreeError::UnknownStyle(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub style: BoostStyle,
    /// Leaf L2 penalty (second_order, histogram, oblivious).
    pub lambda: f64,
    /// Bin count for the histogram and oblivious split search.
    pub max_bins: usize,
    pub min_samples_leaf: usize,
    /// Minimum hessian sum per child (second_order, histogram).
    pub min_child_weight: f64,
    pub seed: u64,
}

impl GbdtParams {
    pub fn new(style: BoostStyle, n_estimators: usize, learning_rate: f64, max_depth: usize) -> Self {
        GbdtParams {
            n_estimators,
            learning_rate,
            max_depth,
            style,
            lambda: 1.0,
            max_bins: 255,
            min_samples_leaf: 1,
            min_child_weight: match style {
                BoostStyle::SecondOrder | BoostStyle::Histogram => 1.0,
                BoostStyle::Classic | BoostStyle::Oblivious => 0.0,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    /// Leaf values already multiplied by the learning rate.
    pub trees: Vec<TreeNode>,
    pub style: BoostStyle,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub lambda: f64,
    pub max_bins: usize,
    pub n_features: usize,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of the training prevalence, clamped away from ±∞.
pub fn prior_log_odds(y: &[Label]) -> f64 {
    let p = y.iter().filter(|&&l| l == 1).count() as f64 / y.len() as f64;
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Mean logistic loss of labels under logits.
pub fn log_loss(y: &[Label], logits: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(logits)
        .map(|(&l, &f)| {
            let z = if l == 1 { f } else { -f };
            // log(1 + exp(-z))
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        })
        .sum();
    total / y.len() as f64
}

/// Per-sample statistics the boosting tree builders consume.
struct BoostStats<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    /// Hessian used in the split score (all ones for the classic style).
    split_hess: &'a [f64],
    split_lambda: f64,
    leaf_lambda: f64,
    min_child_weight: f64,
    min_samples_leaf: usize,
}

impl BoostStats<'_> {
    fn sums(&self, idx: &[usize]) -> (f64, f64, f64) {
        let mut g = 0.0;
        let mut sh = 0.0;
        let mut h = 0.0;
        for &i in idx {
            g += self.grad[i];
            sh += self.split_hess[i];
            h += self.hess[i];
        }
        (g, sh, h)
    }

    fn score(&self, g: f64, sh: f64) -> f64 {
        let denom = sh + self.split_lambda;
        if denom <= 0.0 {
            0.0
        } else {
            g * g / denom
        }
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let (g, _, h) = self.sums(idx);
        let denom = h + self.leaf_lambda;
        if denom.abs() < 1e-150 {
            0.0
        } else {
            -g / denom
        }
    }
}

/// Candidate thresholds per feature for the histogram and oblivious styles.
#[derive(Debug, Clone)]
pub struct BinEdges {
    pub thresholds: Vec<Vec<f64>>,
    /// `bins[f][i]`: number of thresholds of feature `f` below row `i`.
    pub bins: Vec<Vec<u32>>,
}

/// Quantile bin edges. With at most `max_bins` distinct values the edges
/// are the midpoints of adjacent distinct values.
pub fn bin_edges(x: ArrayView2<'_, f64>, max_bins: usize) -> BinEdges {
    let max_bins = max_bins.max(2);
    let thresholds = (0..x.ncols())
        .map(|f| {
            let mut col: Vec<f64> = x.column(f).to_vec();
            col.sort_by(f64::total_cmp);
            let mut distinct = col.clone();
            distinct.dedup();
            if distinct.len() <= max_bins {
                return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
            }
            let n = col.len();
            let mut edges: Vec<f64> = Vec::with_capacity(max_bins - 1);
            for b in 1..max_bins {
                let q = col[(b * n / max_bins).min(n - 1)];
                // largest distinct value strictly below q
                let pos = distinct.partition_point(|&v| v < q);
                if pos == 0 {
                    continue;
                }
                let e = midpoint(distinct[pos - 1], distinct[pos]);
                if edges.last().is_none_or(|&last| e > last) {
                    edges.push(e);
                }
            }
            edges
        })
        .collect::<Vec<Vec<f64>>>();
    let bins = thresholds
        .iter()
        .enumerate()
        .map(|(f, th)| x.column(f).iter().map(|&v| th.partition_point(|&t| t < v) as u32).collect())
        .collect();
    BinEdges { thresholds, bins }
}

enum SplitSearch<'a> {
    Exact,
    Binned(&'a BinEdges),
}

fn best_boost_split(
    x: ArrayView2<'_, f64>,
    idx: &[usize],
    stats: &BoostStats<'_>,
    search: &SplitSearch<'_>,
) -> Option<SplitChoice> {
    let (g_tot, sh_tot, _) = stats.sums(idx);
    let parent = stats.score(g_tot, sh_tot);
    let n = idx.len();
    let mut best: Option<SplitChoice> = None;
    let consider = |feature: usize, threshold: f64, gl: f64, shl: f64, nl: usize, best: &mut Option<SplitChoice>| {
        let nr = n - nl;
        if nl < stats.min_samples_leaf || nr < stats.min_samples_leaf {
            return;
        }
        let shr = sh_tot - shl;
        if shl < stats.min_child_weight || shr < stats.min_child_weight {
            return;
        }
        let gain = stats.score(gl, shl) + stats.score(g_tot - gl, shr) - parent;
        if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
            *best = Some(SplitChoice {
                feature,
                threshold,
                gain,
            });
        }
    };
    match search {
        SplitSearch::Exact => {
            let mut order = idx.to_vec();
            for f in 0..x.ncols() {
                order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
                let mut gl = 0.0;
                let mut shl = 0.0;
                for k in 0..n - 1 {
                    gl += stats.grad[order[k]];
                    shl += stats.split_hess[order[k]];
                    let lo = x[[order[k], f]];
                    let hi = x[[order[k + 1], f]];
                    if lo < hi {
                        consider(f, midpoint(lo, hi), gl, shl, k + 1, &mut best);
                    }
                }
            }
        }
        SplitSearch::Binned(edges) => {
            for f in 0..x.ncols() {
                let th = &edges.thresholds[f];
                if th.is_empty() {
                    continue;
                }
                let mut g_bin = vec![0.0; th.len() + 1];
                let mut h_bin = vec![0.0; th.len() + 1];
                let mut c_bin = vec![0usize; th.len() + 1];
                let bins = &edges.bins[f];
                for &i in idx {
                    let b = bins[i] as usize;
                    g_bin[b] += stats.grad[i];
                    h_bin[b] += stats.split_hess[i];
                    c_bin[b] += 1;
                }
                let mut gl = 0.0;
                let mut shl = 0.0;
                let mut nl = 0;
                for (b, &t) in th.iter().enumerate() {
                    gl += g_bin[b];
                    shl += h_bin[b];
                    nl += c_bin[b];
                    if c_bin[b] == 0 || nl == n {
                        // empty bin repeats the previous partition
                        continue;
                    }
                    consider(f, t, gl, shl, nl, &mut best);
                }
            }
        }
    }
    best
}

fn grow_boost(
    x: ArrayView2<'_, f64>,
    idx: &[usize],
    depth: usize,
    max_depth: usize,
    stats: &BoostStats<'_>,
    search: &SplitSearch<'_>,
) -> TreeNode {
    if depth >= max_depth || idx.len() < 2 {
        return TreeNode::leaf(stats.leaf_value(idx));
    }
    let Some(split) = best_boost_split(x, idx, stats, search) else {
        return TreeNode::leaf(stats.leaf_value(idx));
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[[i, split.feature]] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow_boost(x, &l, depth + 1, max_depth, stats, search)),
        right: Box::new(grow_boost(x, &r, depth + 1, max_depth, stats, search)),
    }
}

/// Symmetric tree: each level applies one split to every current leaf,
/// chosen to maximize the summed gain over those leaves.
fn grow_oblivious(x: ArrayView2<'_, f64>, max_depth: usize, stats: &BoostStats<'_>, edges: &BinEdges) -> TreeNode {
    let n = x.nrows();
    let mut leaf_of = vec![0usize; n];
    let mut n_leaves = 1;
    let mut levels: Vec<(usize, f64)> = Vec::new();
    for _ in 0..max_depth {
        let mut totals = vec![(0.0, 0.0); n_leaves];
        for i in 0..n {
            totals[leaf_of[i]].0 += stats.grad[i];
            totals[leaf_of[i]].1 += stats.split_hess[i];
        }
        let mut best: Option<SplitChoice> = None;
        for (f, th) in edges.thresholds.iter().enumerate() {
            if th.is_empty() {
                continue;
            }
            let width = th.len() + 1;
            // per (leaf, bin) gradient, hessian and count
            let mut g_hist = vec![0.0; n_leaves * width];
            let mut h_hist = vec![0.0; n_leaves * width];
            let mut c_hist = vec![0usize; n_leaves * width];
            for i in 0..n {
                let cell = leaf_of[i] * width + edges.bins[f][i] as usize;
                g_hist[cell] += stats.grad[i];
                h_hist[cell] += stats.split_hess[i];
                c_hist[cell] += 1;
            }
            let mut gain = vec![0.0; th.len()];
            let mut splits = vec![false; th.len()];
            for (leaf, &(g, sh)) in totals.iter().enumerate() {
                let row = leaf * width;
                let leaf_n: usize = c_hist[row..row + width].iter().sum();
                if leaf_n == 0 {
                    continue;
                }
                let base = stats.score(g, sh);
                let (mut gl, mut shl, mut nl) = (0.0, 0.0, 0);
                for b in 0..th.len() {
                    gl += g_hist[row + b];
                    shl += h_hist[row + b];
                    nl += c_hist[row + b];
                    if nl > 0 && nl < leaf_n {
                        splits[b] = true;
                        gain[b] += stats.score(gl, shl) + stats.score(g - gl, sh - shl) - base;
                    }
                }
            }
            for (b, &t) in th.iter().enumerate() {
                if splits[b] && gain[b] > 1e-12 && best.is_none_or(|s| gain[b] > s.gain) {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: t,
                        gain: gain[b],
                    });
                }
            }
        }
        let Some(split) = best else { break };
        levels.push((split.feature, split.threshold));
        for i in 0..n {
            let right = usize::from(x[[i, split.feature]] > split.threshold);
            leaf_of[i] = 2 * leaf_of[i] + right;
        }
        n_leaves *= 2;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_leaves];
    for (i, &leaf) in leaf_of.iter().enumerate() {
        members[leaf].push(i);
    }
    fn build(levels: &[(usize, f64)], depth: usize, leaves: &mut std::slice::Iter<'_, f64>) -> TreeNode {
        if depth == levels.len() {
            return TreeNode::leaf(*leaves.next().expect("one value per leaf"));
        }
        let (feature, threshold) = levels[depth];
        let left = build(levels, depth + 1, leaves);
        let right = build(levels, depth + 1, leaves);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
    let values: Vec<f64> = members.iter().map(|l| stats.leaf_value(l)).collect();
    build(&levels, 0, &mut values.iter())
}

/// Logistic-loss boosting from the prior log-odds.
pub fn train_gbdt(x: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel, TreeError> {
    train_gbdt_observed(x, params, |_, _| {})
}

/// As [`train_gbdt`], calling `observe(round, logits)` after every round.
pub fn train_gbdt_observed(
    x: &FeatureMatrix,
    params: &GbdtParams,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<GbdtModel, TreeError> {
    if x.n_rows() == 0 {
        return Err(TreeError::Empty);
    }
    if !(params.learning_rate >= 0.0 && params.learning_rate.is_finite()) {
        return Err(TreeError::BadLearningRate(params.learning_rate));
    }
    let values = x.values();
    let y = x.labels();
    let n = y.len();
    let base_score = prior_log_odds(y);
    let mut logits = vec![base_score; n];
    let ones = vec![1.0; n];
    let edges = match params.style {
        BoostStyle::Histogram | BoostStyle::Oblivious => Some(bin_edges(values, params.max_bins)),
        _ => None,
    };
    let mut trees = Vec::with_capacity(params.n_estimators);
    let idx: Vec<usize> = (0..n).collect();
    for round in 0..params.n_estimators {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(logits[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let stats = match params.style {
            BoostStyle::Classic => BoostStats {
                grad: &grad,
                hess: &hess,
                split_hess: &ones,
                split_lambda: 0.0,
                leaf_lambda: 0.0,
                min_child_weight: 0.0,
                min_samples_leaf: params.min_samples_leaf.max(1),
            },
            _ => BoostStats {
                grad: &grad,
                hess: &hess,
                split_hess: &hess,
                split_lambda: params.lambda,
                leaf_lambda: params.lambda,
                min_child_weight: params.min_child_weight,
                min_samples_leaf: params.min_samples_leaf.max(1),
            },
        };
        let mut tree = match params.style {
            BoostStyle::Classic | BoostStyle::SecondOrder => {
                grow_boost(values, &idx, 0, params.max_depth, &stats, &SplitSearch::Exact)
            }
            BoostStyle::Histogram => grow_boost(
                values,
                &idx,
                0,
                params.max_depth,
                &stats,
                &SplitSearch::Binned(edges.as_ref().expect("edges computed")),
            ),
            BoostStyle::Oblivious => grow_oblivious(values, params.max_depth, &stats, edges.as_ref().expect("edges computed")),
        };
        tree.scale_leaves(params.learning_rate);
        for (i, logit) in logits.iter_mut().enumerate() {
            *logit += tree.value(values.row(i).as_slice().expect("standard layout"));
        }
        trees.push(tree);
        observe(round, &logits);
    }
    Ok(GbdtModel {
        base_score,
        trees,
        style: params.style,
        learning_rate: params.learning_rate,
        n_estimators: params.n_estimators,
        max_depth: params.max_depth,
        lambda: params.lambda,
        max_bins: params.max_bins,
        n_features: x.n_cols(),
    })
}

impl GbdtModel {
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, TreeError> {
        if x.ncols() != self.n_features {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok((0..x.nrows())
            .map(|i| {
                let row = row_of(x, i);
                self.base_score + self.trees.iter().map(|t| t.value(&row)).sum::<f64>()
            })
            .collect())
    }

    /// Probabilities (sigmoid of the logit) and labels (`p >= 0.5`).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<Label>), TreeError> {
        let probs: Vec<f64> = self.logits(x)?.into_iter().map(sigmoid).collect();
        let labels = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        Ok((probs, labels))
    }
}

/// Either ensemble, for callers that do not care which.
pub enum Ensemble<'a> {
    Forest(&'a ForestModel),
    Gbdt(&'a GbdtModel),
}

pub fn predict_ensemble(m: Ensemble<'_>, x: &FeatureMatrix) -> Result<(Vec<f64>, Vec<Label>), TreeError> {
    match m {
        Ensemble::Forest(f) => f.predict(x.values()),
        Ensemble::Gbdt(g) => g.predict(x.values()),
    }
}

/// Deterministic per-tree seeds are also exposed for callers that train
/// trees themselves.
pub fn tree_seed(master: u64, tree: usize) -> u64 {
    derive_seed(master, tree as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn fm(values: Array2<f64>, labels: Vec<Label>) -> FeatureMatrix {
        FeatureMatrix::from_values(values, labels).unwrap()
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let x = array![[1.0], [2.0], [3.0]];
        let t = train_tree(x.view(), &[1, 1, 1], &TreeParams::default(), None).unwrap();
        assert_eq!(t, TreeNode::leaf(1.0));
    }

    #[test]
    fn stump_separates_signs() {
        let x = array![[-3.0], [-2.0], [-0.5], [0.5], [1.0], [4.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let t = train_tree(x.view(), &y, &params, None).unwrap();
        match &t {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.0);
            }
            _ => panic!("expected a split"),
        }
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(tree_predict_class(&t, &[x[[i, 0]]]), label);
        }
    }

    #[test]
    fn depth_limit_respected() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0], [6.0], [7.0]];
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        for depth in 1..4 {
            let params = TreeParams {
                max_depth: Some(depth),
                ..TreeParams::default()
            };
            let t = train_tree(x.view(), &y, &params, None).unwrap();
            assert!(t.depth() <= depth);
        }
        let full = train_tree(x.view(), &y, &TreeParams::default(), None).unwrap();
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(tree_predict_class(&full, &[x[[i, 0]]]), label);
        }
    }

    #[test]
    fn forest_of_one_matches_tree() {
        let x = fm(
            array![[0.0, 1.0], [1.0, 0.5], [2.0, 2.0], [3.0, 0.1], [4.0, 1.5], [5.0, 0.2]],
            vec![0, 0, 1, 0, 1, 1],
        );
        let params = ForestParams {
            n_estimators: 1,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: Some(2),
            bootstrap: false,
            seed: 9,
        };
        let forest = train_forest(&x, &params).unwrap();
        let tree = train_tree(x.values(), x.labels(), &TreeParams::default(), None).unwrap();
        assert_eq!(forest.trees[0], tree);
        let (_, labels) = forest.predict(x.values()).unwrap();
        let tree_labels: Vec<Label> = (0..6).map(|i| tree_predict_class(&tree, &x.row(i).to_vec())).collect();
        assert_eq!(labels, tree_labels);
    }

    #[test]
    fn forest_vote_ties_go_to_positive() {
        let forest = ForestModel {
            trees: vec![TreeNode::leaf(0.0), TreeNode::leaf(1.0)],
            tree_seeds: vec![0, 1],
            max_features: 1,
            n_estimators: 2,
            max_depth: None,
            bootstrap: false,
            n_features: 1,
        };
        let (votes, labels) = forest.predict(array![[0.0]].view()).unwrap();
        assert_eq!(votes, vec![0.5]);
        assert_eq!(labels, vec![1]);
    }

    #[test]
    fn zero_rounds_and_zero_rate_give_prior() {
        let x = fm(array![[0.0], [1.0], [2.0], [3.0]], vec![0, 1, 1, 1]);
        for style in BoostStyle::ALL {
            let m = train_gbdt(&x, &GbdtParams::new(style, 0, 0.1, 3)).unwrap();
            let logits = m.logits(x.values()).unwrap();
            assert!(logits.iter().all(|&l| l == m.base_score));
            let m = train_gbdt(&x, &GbdtParams::new(style, 1, 0.0, 3)).unwrap();
            let logits = m.logits(x.values()).unwrap();
            assert!(logits.iter().all(|&l| l == m.base_score), "{style}");
            let (_, labels) = m.predict(x.values()).unwrap();
            assert_eq!(labels, vec![1, 1, 1, 1]);
        }
        assert!((prior_log_odds(&[0, 1, 1, 1]) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn negative_learning_rate_rejected() {
        let x = fm(array![[0.0], [1.0]], vec![0, 1]);
        assert_eq!(
            train_gbdt(&x, &GbdtParams::new(BoostStyle::Classic, 1, -0.1, 1)).unwrap_err(),
            TreeError::BadLearningRate(-0.1)
        );
    }

    #[test]
    fn oblivious_levels_share_one_split() {
        let x = fm(
            array![
                [0.1, 5.0],
                [0.4, 1.0],
                [0.9, 3.0],
                [1.3, 0.5],
                [1.8, 4.5],
                [2.2, 2.0],
                [2.9, 0.2],
                [3.5, 3.3]
            ],
            vec![0, 0, 1, 0, 1, 1, 0, 1],
        );
        let m = train_gbdt(&x, &GbdtParams::new(BoostStyle::Oblivious, 5, 0.3, 3)).unwrap();
        for t in &m.trees {
            for (depth, level) in t.splits_by_level().iter().enumerate() {
                assert_eq!(level.len(), 1 << depth);
                assert!(level.iter().all(|s| *s == level[0]));
            }
        }
    }

    #[test]
    fn bin_edges_are_distinct_midpoints_when_few_values() {
        let x = array![[1.0], [3.0], [3.0], [7.0]];
        let e = bin_edges(x.view(), 255);
        assert_eq!(e.thresholds[0], vec![2.0, 5.0]);
        let many: Array2<f64> = Array2::from_shape_fn((100, 1), |(i, _)| i as f64);
        let e = bin_edges(many.view(), 4);
        assert_eq!(e.thresholds[0], vec![24.5, 49.5, 74.5]);
    }

    #[test]
    fn gbdt_dimension_mismatch() {
        let x = fm(array![[0.0], [1.0]], vec![0, 1]);
        let m = train_gbdt(&x, &GbdtParams::new(BoostStyle::Classic, 2, 0.1, 1)).unwrap();
        assert!(matches!(
            m.predict(array![[1.0, 2.0]].view()),
            Err(TreeError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn style_names_round_trip() {
        for s in BoostStyle::ALL {
            assert_eq!(s.name().parse::<BoostStyle>().unwrap(), s);
        }
        assert_eq!("xgboost".parse::<BoostStyle>().unwrap(), BoostStyle::SecondOrder);
    }
}
