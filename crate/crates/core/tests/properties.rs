use ndarray::Array2;
use pdbench::ingest::pearson_matrix;
use pdbench::metrics::evaluate;
use pdbench::preprocess::{fit_scaler, stratified_kfold, stratified_split, stratified_test_counts};
use pdbench::rng::seeded;
use pdbench::svm::{kernel_matrix, smo_solve, Kernel};
use pdbench::tree_ensembles::{
    bootstrap_indices, log_loss, prior_log_odds, train_gbdt, train_gbdt_observed, BoostStyle, GbdtParams, TreeNode,
};
use pdbench::{FeatureMatrix, Label};
use proptest::collection::vec;
use proptest::prelude::*;

fn labels_with_both(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Label>> {
    vec(0u8..2, n).prop_filter("both classes", |y| y.contains(&0) && y.contains(&1))
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = FeatureMatrix> {
    (rows, cols)
        .prop_flat_map(|(n, d)| (vec(-5.0f64..5.0, n * d), labels_with_both(n..n + 1), Just((n, d))))
        .prop_map(|(v, y, (n, d))| FeatureMatrix::from_values(Array2::from_shape_vec((n, d), v).unwrap(), y).unwrap())
}

fn leaves(t: &TreeNode, out: &mut Vec<f64>) {
    match t {
        TreeNode::Leaf { leaf } => out.push(*leaf),
        TreeNode::Split { left, right, .. } => {
            leaves(left, out);
            leaves(right, out);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_row_order(pairs in vec((0u8..2, 0u8..2), 1..60), seed in any::<u64>()) {
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.iter().copied().unzip();
        let base = evaluate(&t, &p).unwrap();
        let mut shuffled = pairs.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut seeded(seed));
        let (t2, p2): (Vec<Label>, Vec<Label>) = shuffled.into_iter().unzip();
        let again = evaluate(&t2, &p2).unwrap();
        prop_assert_eq!(base.accuracy(), again.accuracy());
        prop_assert_eq!(base.precision(), again.precision());
        prop_assert_eq!(base.tp + base.fp + base.tn + base.r#fn, pairs.len());
    }

    #[test]
    fn split_is_a_stratified_partition(y in labels_with_both(5..200), frac in 0.05f64..0.6, seed in any::<u64>()) {
        let plan = stratified_split(&y, frac, seed).unwrap();
        let mut all: Vec<usize> = plan.train.iter().chain(&plan.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        let counts = [y.iter().filter(|&&l| l == 0).count(), y.iter().filter(|&&l| l == 1).count()];
        let expected = stratified_test_counts(&counts, frac);
        for c in 0..2u8 {
            let got = plan.test.iter().filter(|&&i| y[i] == c).count();
            prop_assert_eq!(got, expected[usize::from(c)]);
        }
        prop_assert_eq!(stratified_split(&y, frac, seed).unwrap(), plan);
    }

    #[test]
    fn kfold_tests_partition_the_rows(y in labels_with_both(10..120), k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(y.iter().filter(|&&l| l == 0).count() >= k && y.iter().filter(|&&l| l == 1).count() >= k);
        let folds = stratified_kfold(&y, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; y.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            prop_assert_eq!(f.train.len() + f.test.len(), y.len());
            prop_assert!(f.train.iter().all(|i| !f.test.contains(i)));
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn scaler_centres_training_columns(x in matrix(3..40, 1..6)) {
        prop_assume!((0..x.n_cols()).all(|j| {
            let c = x.column(j);
            c.iter().any(|&v| (v - c[0]).abs() > 1e-6)
        }));
        let s = fit_scaler(&x).unwrap();
        let z = s.apply(&x).unwrap();
        for j in 0..z.n_cols() {
            let col = z.column(j);
            let mean = col.sum() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9 || (var - (col.len() as f64 - 1.0) / col.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn smo_iterates_stay_feasible(x in matrix(2..12, 1..4), c in 0.05f64..20.0) {
        let y: Vec<f64> = x.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let k = kernel_matrix(x.values(), &Kernel::rbf(0.5));
        let mut ok = true;
        let sol = smo_solve(&k, &y, c, 1e-6, 10_000, |a| {
            let balance: f64 = a.iter().zip(&y).map(|(a, y)| a * y).sum();
            ok &= a.iter().all(|&v| (0.0..=c).contains(&v)) && balance.abs() < 1e-9;
        });
        prop_assert!(ok);
        prop_assert!(sol.alpha.iter().all(|&v| (0.0..=c).contains(&v)));
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(x in matrix(4..40, 2..6)) {
        let cols: Vec<Vec<f64>> = (0..x.n_cols()).map(|j| x.column(j).to_vec()).collect();
        let labels: Vec<String> = (0..x.n_cols()).map(|j| format!("f{j}")).collect();
        let m = pearson_matrix(labels, &cols).unwrap();
        for i in 0..x.n_cols() {
            prop_assert!((m.values[[i, i]] - 1.0).abs() < 1e-12);
            for j in 0..x.n_cols() {
                prop_assert_eq!(m.values[[i, j]], m.values[[j, i]]);
                prop_assert!(m.values[[i, j]].abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn zero_rounds_predict_the_prior(x in matrix(2..30, 1..4), style_ix in 0usize..4) {
        let style = BoostStyle::ALL[style_ix];
        let m = train_gbdt(&x, &GbdtParams::new(style, 0, 0.1, 3)).unwrap();
        let prior = prior_log_odds(x.labels());
        prop_assert!(m.trees.is_empty());
        prop_assert!(m.logits(x.values()).unwrap().iter().all(|&l| l == prior));
    }

    #[test]
    fn oblivious_trees_share_one_split_per_level(x in matrix(8..40, 1..5), depth in 1usize..5) {
        let m = train_gbdt(&x, &GbdtParams::new(BoostStyle::Oblivious, 4, 0.3, depth)).unwrap();
        for t in &m.trees {
            prop_assert!(t.depth() <= depth);
            prop_assert_eq!(t.n_leaves(), 1 << t.depth());
            for (level, splits) in t.splits_by_level().iter().enumerate() {
                prop_assert_eq!(splits.len(), 1 << level);
                prop_assert!(splits.iter().all(|s| *s == splits[0]));
            }
        }
    }

    #[test]
    fn histogram_equals_exact_when_every_value_has_a_bin(x in matrix(6..40, 1..4), depth in 1usize..4) {
        let exact = train_gbdt(&x, &GbdtParams::new(BoostStyle::SecondOrder, 5, 0.3, depth)).unwrap();
        let hist = train_gbdt(&x, &GbdtParams::new(BoostStyle::Histogram, 5, 0.3, depth)).unwrap();
        for (a, b) in exact.trees.iter().zip(&hist.trees) {
            for i in 0..x.n_rows() {
                let row = x.row(i).to_vec();
                prop_assert_eq!(a.leaf_index(&row), b.leaf_index(&row));
            }
            let (mut la, mut lb) = (Vec::new(), Vec::new());
            leaves(a, &mut la);
            leaves(b, &mut lb);
            prop_assert_eq!(la.len(), lb.len());
            for (u, v) in la.iter().zip(&lb) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn second_order_training_loss_never_rises(x in matrix(6..40, 1..4), depth in 1usize..4) {
        let mut losses = vec![log_loss(x.labels(), &vec![prior_log_odds(x.labels()); x.n_rows()])];
        train_gbdt_observed(&x, &GbdtParams::new(BoostStyle::SecondOrder, 15, 0.1, depth), |_, logits| {
            losses.push(log_loss(x.labels(), logits));
        }).unwrap();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", losses);
        }
    }
}

#[test]
fn bootstrap_draws_each_row_once_on_average() {
    let n = 20;
    let draws = 4000;
    let mut rng = seeded(5);
    let mut counts = vec![0usize; n];
    let mut distinct = 0usize;
    for _ in 0..draws {
        let idx = bootstrap_indices(n, &mut rng);
        assert_eq!(idx.len(), n);
        let mut seen = vec![false; n];
        for i in idx {
            counts[i] += 1;
            seen[i] = true;
        }
        distinct += seen.iter().filter(|&&s| s).count();
    }
    for c in counts {
        let mean = c as f64 / draws as f64;
        assert!((mean - 1.0).abs() < 0.1, "marginal {mean}");
    }
    let expected = n as f64 * (1.0 - (1.0 - 1.0 / n as f64).powi(n as i32));
    let got = distinct as f64 / draws as f64;
    assert!((got - expected).abs() < 0.1, "distinct {got} vs {expected}");
}
