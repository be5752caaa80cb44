//! Shared fixtures for the integration tests.
//!
//! The reference voice file is not bundled with the crate. Tests that need it
//! look it up with [`reference_data`]; everything else runs on a seeded
//! stand-in with the same schema, class balance and naming scheme.

#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use pdbench::{Dataset, VoiceRecord, FEATURE_NAMES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Location of the reference file: `$PDBENCH_DATA`, then `data/parkinsons.data`
/// at the workspace root.
pub fn reference_data() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("PDBENCH_DATA") {
        let p = PathBuf::from(p);
        if p.is_file() {
            return Some(p);
        }
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/parkinsons.data");
    root.is_file().then_some(root)
}

/// Per-feature (centre, spread, direction of the disease effect, log-scale).
/// Log-scale features are drawn as `centre * exp(spread * z)`; the rest as
/// `centre + spread * z`.
const SHAPE: [(f64, f64, f64, bool); 22] = [
    (148.8, 0.25, -0.5, true),  // Fo
    (175.8, 0.35, -0.4, true),  // Fhi
    (104.3, 0.35, -0.5, true),  // Flo
    (0.0054, 0.45, 0.6, true),  // Jitter(%)
    (0.00003, 0.6, 0.6, true),  // Jitter(Abs)
    (0.0029, 0.5, 0.6, true),   // RAP
    (0.0030, 0.5, 0.6, true),   // PPQ
    (0.0087, 0.5, 0.6, true),   // DDP
    (0.0268, 0.5, 0.6, true),   // Shimmer
    (0.242, 0.5, 0.6, true),    // Shimmer(dB)
    (0.0128, 0.5, 0.6, true),   // APQ3
    (0.0146, 0.5, 0.6, true),   // APQ5
    (0.0168, 0.5, 0.6, true),   // APQ
    (0.0386, 0.5, 0.6, true),   // DDA
    (0.0194, 0.6, 0.5, true),   // NHR
    (22.07, 4.4, -0.6, false),  // HNR
    (0.543, 0.065, 0.5, false), // RPDE
    (0.722, 0.055, 0.3, false), // DFA
    (-5.68, 1.09, 0.8, false),  // spread1
    (0.186, 0.089, 0.6, false), // spread2
    (2.36, 0.38, 0.5, false),   // D2
    (0.194, 0.5, 0.8, true),    // PPE
];

/// A deterministic 195-row stand-in: 147 status=1 and 48 status=0 rows over
/// 32 subjects with names like `phon_R01_S07_3`.
pub fn surrogate_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    // 24 affected subjects (three with seven recordings), 8 healthy ones.
    let mut subjects: Vec<(usize, u8, usize)> = Vec::new();
    for s in 0..32 {
        let status = u8::from(s % 4 != 3);
        let n = if status == 1 && s < 4 { 7 } else { 6 };
        subjects.push((s + 1, status, n));
    }
    let mut records = Vec::with_capacity(195);
    for (subject, status, n) in subjects {
        // Subject-level offset shared by all recordings of one voice.
        let voice: f64 = normal() * 0.5;
        let centre = if status == 1 { 0.5 } else { -1.6 };
        for k in 1..=n {
            let severity = centre + voice + 0.6 * normal();
            let quality = normal();
            let mut features = [0.0; 22];
            for (j, &(c, spread, dir, log_scale)) in SHAPE.iter().enumerate() {
                // perturbation measures move together, the rest are noisier
                let (group, noise) = if (3..15).contains(&j) { (0.8 * quality, 0.15) } else { (0.0, 0.45) };
                let z = dir * severity + group + noise * normal();
                let v = if log_scale { c * (spread * z).exp() } else { c + spread * z };
                features[j] = (v * 1e6).round() / 1e6;
            }
            for f in &mut features[..3] {
                *f = f.max(50.0);
            }
            records.push(VoiceRecord {
                name: format!("phon_R01_S{subject:02}_{k}"),
                features,
                status,
            });
        }
    }
    assert_eq!(records.len(), 195);
    assert_eq!(FEATURE_NAMES.len(), 22);
    Dataset::from_records(records).expect("surrogate satisfies dataset invariants")
}

/// Writes the stand-in to `dir/parkinsons.data` and returns its path.
pub fn write_surrogate(dir: &Path, seed: u64) -> PathBuf {
    let path = dir.join("parkinsons.data");
    std::fs::write(&path, surrogate_dataset(seed).to_csv()).expect("temp dir is writable");
    path
}

/// One fitted model of every kind on the context's training rows, each
/// wrapped with the preprocessing it expects.
pub fn five_models(ctx: &pdbench::bench::BenchContext) -> Vec<pdbench::model_io::ModelFile> {
    use pdbench::linear_models::{train_logreg, Solver, SolverConfig};
    use pdbench::model_io::{ModelFile, Preprocessing, TrainedModel};
    use pdbench::neural::{train_neural, NetKind, NeuralSpec};
    use pdbench::svm::{gamma_scale, train_svm, Kernel, DEFAULT_TOL};
    use pdbench::tree_ensembles::{train_forest, train_gbdt, BoostStyle, ForestParams, GbdtParams};

    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let plain = Preprocessing {
        scaler: ctx.scaler.clone(),
        pca: None,
    };
    let reduced = Preprocessing {
        scaler: ctx.scaler.clone(),
        pca: Some(ctx.pca.clone()),
    };
    let lstm = NeuralSpec {
        epochs: 20,
        ..NeuralSpec::default_for(NetKind::Lstm)
    };
    let models = vec![
        (
            plain.clone(),
            TrainedModel::Logreg(train_logreg(&ctx.train, 1.0, &SolverConfig::new(Solver::Lbfgs)).unwrap()),
        ),
        (
            plain.clone(),
            TrainedModel::Svm(train_svm(&ctx.train, 10.0, Kernel::rbf(gamma_scale(ctx.train.values())), DEFAULT_TOL).unwrap()),
        ),
        (
            plain.clone(),
            TrainedModel::Forest(train_forest(&ctx.train, &ForestParams::new(50, None, 42)).unwrap()),
        ),
        (
            reduced,
            TrainedModel::Gbdt(train_gbdt(&ctx.train_pca, &GbdtParams::new(BoostStyle::Histogram, 50, 0.1, 3)).unwrap()),
        ),
        (plain, TrainedModel::from_neural(&train_neural(&ctx.train, &lstm).unwrap())),
    ];
    models
        .into_iter()
        .map(|(pre, m)| ModelFile::new(names.clone(), pre, m))
        .collect()
}

/// Saves and reloads each model, then compares predictions on the raw test
/// rows bit for bit. Returns `(kind, identical)` per model.
pub fn save_load_identical(ctx: &pdbench::bench::BenchContext, dir: &Path) -> Vec<(&'static str, bool)> {
    use pdbench::model_io::{load_model, save_model};
    let raw = ctx.dataset.to_feature_matrix().select_rows(&ctx.split.test);
    five_models(ctx)
        .into_iter()
        .map(|m| {
            let path = dir.join(format!("{}.json", m.model.kind()));
            save_model(&m, &path).unwrap();
            let back = load_model(&path).unwrap();
            let (p0, l0) = m.predict_raw(raw.values()).unwrap();
            let (p1, l1) = back.predict_raw(raw.values()).unwrap();
            let bits = |p: Option<Vec<f64>>| p.map(|v| v.into_iter().map(f64::to_bits).collect::<Vec<_>>());
            (m.model.kind(), l0 == l1 && bits(p0) == bits(p1) && back == m)
        })
        .collect()
}
