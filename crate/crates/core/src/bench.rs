//! Benchmark runner: executes the hyperparameter grids on one stratified
//! split and writes CSV, Markdown, the SVG correlation heatmap, and a
//! provenance record.
//!
//! Grids are data, loaded from `grids/suites.json` (compiled in).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};
use crate::ingest::{self, correlation_matrix, summarize, CorrMatrix, Dataset, IngestError};
use crate::linear_models::{select_c, train_logreg, Solver, SolverConfig};
use crate::metrics::{evaluate, format_4dp, time_training, EvalReport};
use crate::neural::{train_neural, NetKind, NeuralSpec};
use crate::preprocess::{
    fit_pca, fit_scaler, stratified_kfold, stratified_split, PcaModel, PreprocessError, Scaler, SplitPlan,
    DEFAULT_CV_FOLDS, DEFAULT_TEST_FRACTION, DEFAULT_VARIANCE_TARGET,
};
use crate::rng::DEFAULT_SEED;
use crate::svm::{gamma_scale, train_svm, Kernel, KernelKind, DEFAULT_TOL};
use crate::tree_ensembles::{train_forest, train_gbdt, BoostStyle, ForestParams, GbdtParams};

const GRID_JSON: &str = include_str!("../grids/suites.json");

pub const CSV_HEADER: &str = "config,accuracy,precision,train_time_s";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown suite `{0}`; valid suites: {}", Suite::NAMES.join(", "))]
    UnknownSuite(String),
    #[error("grid file is invalid: {0}")]
    Grid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Table1,
    Heatmap,
    Gcf,
    Logreg,
    LogregPca,
    Svm,
    SvmPca,
    Gbm,
    XgbStyle,
    LgbmStyle,
    CatboostStyle,
    Neural,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::Table1,
        Suite::Heatmap,
        Suite::Gcf,
        Suite::Logreg,
        Suite::LogregPca,
        Suite::Svm,
        Suite::SvmPca,
        Suite::Gbm,
        Suite::XgbStyle,
        Suite::LgbmStyle,
        Suite::CatboostStyle,
        Suite::Neural,
    ];

    pub const NAMES: [&'static str; 13] = [
        "table1",
        "heatmap",
        "gcf",
        "logreg",
        "logreg_pca",
        "svm",
        "svm_pca",
        "gbm",
        "xgb_style",
        "lgbm_style",
        "catboost_style",
        "neural",
        "all",
    ];

    pub fn name(self) -> &'static str {
        Suite::NAMES[Suite::ALL.iter().position(|&s| s == self).expect("listed")]
    }

    /// Suites whose output depends on nothing random beyond the seed.
    pub fn is_model_suite(self) -> bool {
        !matches!(self, Suite::Table1 | Suite::Heatmap)
    }

    /// Expands a comma-separated selection; `all` selects every suite.
    pub fn parse_selection(s: &str) -> Result<Vec<Suite>, BenchError> {
        let mut out: Vec<Suite> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Suite::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Suite::ALL
            .iter()
            .copied()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| BenchError::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub data: PathBuf,
    pub seed: u64,
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub suites: Vec<Suite>,
    pub out_dir: PathBuf,
    /// When false the timing column is left empty, making every output
    /// byte-comparable across runs.
    pub record_timing: bool,
}

impl BenchConfig {
    pub fn new(data: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        BenchConfig {
            data: data.into(),
            seed: DEFAULT_SEED,
            test_fraction: DEFAULT_TEST_FRACTION,
            cv_folds: DEFAULT_CV_FOLDS,
            suites: Suite::ALL.to_vec(),
            out_dir: out_dir.into(),
            record_timing: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct GridFile {
    pub version: u32,
    pub cv_c_grid: Vec<f64>,
    pub suites: Vec<SuiteGrid>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SuiteGrid {
    pub name: String,
    pub title: String,
    pub first_column: String,
    pub pca: bool,
    #[serde(flatten)]
    pub family: Family,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Forest {
        n_estimators: Vec<usize>,
        max_depth: Vec<Option<usize>>,
    },
    Logreg {
        solvers: Vec<String>,
    },
    Svm {
        kernels: Vec<String>,
        c: f64,
    },
    Gbdt {
        style: String,
        n_estimators: Vec<usize>,
        learning_rate: Vec<f64>,
        max_depth: Vec<usize>,
    },
    Neural {
        kinds: Vec<String>,
    },
}

impl SuiteGrid {
    /// Number of rows the suite produces.
    pub fn n_cells(&self) -> usize {
        match &self.family {
            Family::Forest { n_estimators, max_depth } => n_estimators.len() * max_depth.len(),
            Family::Logreg { solvers } => solvers.len(),
            Family::Svm { kernels, .. } => kernels.len(),
            Family::Gbdt {
                n_estimators,
                learning_rate,
                max_depth,
                ..
            } => n_estimators.len() * learning_rate.len() * max_depth.len(),
            Family::Neural { kinds } => kinds.len(),
        }
    }
}

pub fn grid_file() -> Result<GridFile, BenchError> {
    serde_json::from_str(GRID_JSON).map_err(|e| BenchError::Grid(e.to_string()))
}

pub fn suite_grid(suite: Suite) -> Result<SuiteGrid, BenchError> {
    grid_file()?
        .suites
        .into_iter()
        .find(|g| g.name == suite.name())
        .ok_or_else(|| BenchError::Grid(format!("no grid for suite {suite}")))
}

/// Loaded data, the fixed split and both feature views of it.
#[derive(Debug, Clone)]
pub struct BenchContext {
    pub dataset: Dataset,
    pub split: SplitPlan,
    pub scaler: Scaler,
    pub pca: PcaModel,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub train_pca: FeatureMatrix,
    pub test_pca: FeatureMatrix,
    pub data_sha256: String,
}

impl BenchContext {
    pub fn load(cfg: &BenchConfig) -> Result<Self, BenchError> {
        let bytes = fs::read(&cfg.data).map_err(io_err(&cfg.data))?;
        let dataset = ingest::parse_dataset(bytes.as_slice())?;
        if let Some(note) = dataset.reported_count_discrepancy() {
            log::warn!("{note}");
        }
        let data_sha256 = hex::encode(Sha256::digest(&bytes));
        Self::from_dataset(dataset, cfg, data_sha256)
    }

    pub fn from_dataset(dataset: Dataset, cfg: &BenchConfig, data_sha256: String) -> Result<Self, BenchError> {
        let all = dataset.to_feature_matrix();
        let split = stratified_split(all.labels(), cfg.test_fraction, cfg.seed)?;
        let scaler = fit_scaler(&all.select_rows(&split.train))?;
        let train = scaler.apply(&all.select_rows(&split.train))?;
        let test = scaler.apply(&all.select_rows(&split.test))?;
        let pca = fit_pca(&train, DEFAULT_VARIANCE_TARGET)?;
        let train_pca = pca.apply(&train)?;
        let test_pca = pca.apply(&test)?;
        Ok(BenchContext {
            dataset,
            split,
            scaler,
            pca,
            train,
            test,
            train_pca,
            test_pca,
            data_sha256,
        })
    }

    fn views(&self, pca: bool) -> (&FeatureMatrix, &FeatureMatrix) {
        if pca {
            (&self.train_pca, &self.test_pca)
        } else {
            (&self.train, &self.test)
        }
    }
}

/// One grid cell: a scored model or the reason it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub config: String,
    pub outcome: Result<EvalReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSet {
    pub suite: Suite,
    pub title: String,
    pub first_column: String,
    pub rows: Vec<CellResult>,
    pub seed: u64,
    pub split_hash: String,
    /// Suite-specific facts such as the chosen C or PCA dimension.
    pub details: BTreeMap<String, serde_json::Value>,
}

impl ReportSet {
    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn get(&self, config: &str) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.config == config)?.outcome.as_ref().ok()
    }

    pub fn best_accuracy(&self) -> Option<f64> {
        self.reports().map(EvalReport::accuracy).reduce(f64::max)
    }
}

fn score<T, E: fmt::Display>(
    config: String,
    test: &FeatureMatrix,
    fit: impl FnOnce() -> Result<T, E>,
    predict: impl FnOnce(&T) -> Result<Vec<Label>, E>,
) -> CellResult {
    let outcome = time_training(fit)
        .and_then(|(model, secs)| {
            let pred = predict(&model)?;
            Ok((pred, secs))
        })
        .map_err(|e| e.to_string())
        .and_then(|(pred, secs)| {
            evaluate(test.labels(), &pred)
                .map(|r| r.with_config(config.clone()).with_time(secs))
                .map_err(|e| e.to_string())
        });
    if let Err(e) = &outcome {
        log::warn!("cell `{config}` failed: {e}");
    }
    CellResult { config, outcome }
}

fn logreg_label(s: Solver) -> &'static str {
    match s {
        Solver::Newton => "newton-cg",
        other => other.name(),
    }
}

fn fmt_num(v: f64) -> String {
    // 10 -> "10", 0.1 -> "0.1"
    format!("{v}")
}

pub fn run_suite(ctx: &BenchContext, cfg: &BenchConfig, suite: Suite) -> Result<ReportSet, BenchError> {
    let grid = suite_grid(suite)?;
    let (train, test) = ctx.views(grid.pca);
    let mut details = BTreeMap::new();
    if grid.pca {
        details.insert("pca_components".into(), json!(ctx.pca.k));
    }
    let mut rows = Vec::with_capacity(grid.n_cells());
    match &grid.family {
        Family::Forest { n_estimators, max_depth } => {
            for &n in n_estimators {
                for &depth in max_depth {
                    let label = format!(
                        "gcF (n_estimators={n}, max_depth={})",
                        depth.map_or("None".to_string(), |d| d.to_string())
                    );
                    let params = ForestParams::new(n, depth, cfg.seed);
                    rows.push(score(label, test, || train_forest(train, &params), |m| {
                        m.predict(test.values()).map(|p| p.1)
                    }));
                }
            }
        }
        Family::Logreg { solvers } => {
            let c_grid = grid_file()?.cv_c_grid;
            let folds = stratified_kfold(train.labels(), cfg.cv_folds, cfg.seed)?;
            let base = SolverConfig::new(Solver::Newton).with_seed(cfg.seed);
            let chosen = select_c(train, &c_grid, &base, &folds)
                .map_err(|e| BenchError::Grid(format!("C selection failed: {e}")))?;
            details.insert("chosen_c".into(), json!(chosen.chosen_c));
            details.insert(
                "cv_mean_accuracy".into(),
                json!(chosen.table.iter().map(|r| (fmt_num(r.c), r.mean_accuracy)).collect::<BTreeMap<_, _>>()),
            );
            for name in solvers {
                let solver: Solver = name.parse().map_err(|e| BenchError::Grid(format!("{e}")))?;
                let sc = SolverConfig::new(solver).with_seed(cfg.seed);
                rows.push(score(
                    logreg_label(solver).to_string(),
                    test,
                    || train_logreg(train, chosen.chosen_c, &sc),
                    |m| m.predict(test.values()).map(|p| p.1),
                ));
            }
        }
        Family::Svm { kernels, c } => {
            let gamma = gamma_scale(train.values());
            details.insert("gamma".into(), json!(gamma));
            details.insert("C".into(), json!(c));
            for name in kernels {
                let kind: KernelKind = name.parse().map_err(|e| BenchError::Grid(format!("{e}")))?;
                let kernel = Kernel::with_defaults(kind, gamma);
                rows.push(score(
                    kind.name().to_string(),
                    test,
                    || train_svm(train, *c, kernel, DEFAULT_TOL),
                    |m| m.predict(test.values()).map(|p| p.1),
                ));
            }
        }
        Family::Gbdt {
            style,
            n_estimators,
            learning_rate,
            max_depth,
        } => {
            let style: BoostStyle = style.parse().map_err(|e| BenchError::Grid(format!("{e}")))?;
            details.insert("style".into(), json!(style.name()));
            for &n in n_estimators {
                for &rate in learning_rate {
                    for &depth in max_depth {
                        let mut params = GbdtParams::new(style, n, rate, depth);
                        params.seed = cfg.seed;
                        rows.push(score(
                            format!("n={n}, rate={}, depth={depth}", fmt_num(rate)),
                            test,
                            || train_gbdt(train, &params),
                            |m| m.predict(test.values()).map(|p| p.1),
                        ));
                    }
                }
            }
        }
        Family::Neural { kinds } => {
            for name in kinds {
                let kind: NetKind = name.parse().map_err(|e| BenchError::Grid(format!("{e}")))?;
                let mut spec = NeuralSpec::default_for(kind);
                spec.seed = cfg.seed;
                rows.push(score(
                    kind.name().to_uppercase(),
                    test,
                    || train_neural(train, &spec),
                    |m| m.predict(test.values()).map(|p| p.1),
                ));
            }
        }
    }
    Ok(ReportSet {
        suite,
        title: grid.title,
        first_column: grid.first_column,
        rows,
        seed: cfg.seed,
        split_hash: ctx.split.content_hash(),
        details,
    })
}

fn provenance_line(seed: u64, split_hash: &str) -> String {
    format!("seed={seed} split_sha256={split_hash}")
}

fn time_cell(r: &EvalReport, record_timing: bool) -> String {
    match (record_timing, r.train_time_seconds) {
        (true, Some(t)) => format_4dp(t),
        _ => String::new(),
    }
}

/// CSV with a leading `#` provenance comment, then the header row.
pub fn report_csv(rs: &ReportSet, record_timing: bool) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for row in &rs.rows {
        let rec = match &row.outcome {
            Ok(r) => [row.config.clone(), r.accuracy_str(), r.precision_str(), time_cell(r, record_timing)],
            Err(_) => [row.config.clone(), "failed".into(), String::new(), String::new()],
        };
        w.write_record(&rec).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("flush to vec")).expect("utf-8 input");
    format!("# {}\n{body}", provenance_line(rs.seed, &rs.split_hash))
}

pub fn report_markdown(rs: &ReportSet, record_timing: bool) -> String {
    let mut out = format!("<!-- {} -->\n\n", provenance_line(rs.seed, &rs.split_hash));
    let _ = writeln!(out, "| {} | Accuracy | Precision | Training Time (s) |", rs.first_column);
    out.push_str("|---|---:|---:|---:|\n");
    for row in &rs.rows {
        match &row.outcome {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    row.config,
                    r.accuracy_str(),
                    r.precision_str(),
                    time_cell(r, record_timing)
                );
            }
            Err(e) => {
                let _ = writeln!(out, "| {} | failed: {} | | |", row.config, e.replace('|', "/"));
            }
        }
    }
    let _ = writeln!(out, "\n{}", rs.title);
    out
}

/// `(config, accuracy, precision, time)` as read back from a report CSV.
pub type ReportRow = (String, Option<f64>, Option<f64>, Option<f64>);

/// Parses a bench CSV back into its rows.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let num = |s: &str| s.parse::<f64>().ok();
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok((rec[0].to_string(), num(&rec[1]), num(&rec[2]), num(&rec[3])))
        })
        .collect()
}

/// Diverging blue-white-red scale over [-1, 1].
pub fn diverging_color(v: f64) -> (u8, u8, u8) {
    let v = v.clamp(-1.0, 1.0);
    let (end, t) = if v < 0.0 { ((59.0, 76.0, 192.0), -v) } else { ((180.0, 4.0, 38.0), v) };
    let mix = |e: f64| (247.0 + (e - 247.0) * t).round() as u8;
    (mix(end.0), mix(end.1), mix(end.2))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG heatmap with one colored cell per matrix entry, two-decimal cell
/// text, and labels on both axes.
pub fn heatmap_svg(c: &CorrMatrix, note: Option<&str>) -> String {
    const CELL: usize = 34;
    const MARGIN: usize = 130;
    let n = c.labels.len();
    let size = MARGIN + n * CELL + 20;
    let legend_y = MARGIN + n * CELL + 10;
    let height = size + 40;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{height}" viewBox="0 0 {size} {height}" font-family="sans-serif">"#
    );
    if let Some(note) = note {
        let _ = writeln!(s, "<desc>{}</desc>", xml_escape(note));
    }
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, label) in c.labels.iter().enumerate() {
        let pos = MARGIN + i * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{pos}" font-size="10" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            MARGIN - 4,
            xml_escape(label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{pos}" y="{}" font-size="10" text-anchor="start" transform="rotate(-60 {pos} {})">{}</text>"#,
            MARGIN - 4,
            MARGIN - 4,
            xml_escape(label)
        );
    }
    for i in 0..n {
        for j in 0..n {
            let v = c.values[[i, j]];
            let (r, g, b) = diverging_color(v);
            let x = MARGIN + j * CELL;
            let y = MARGIN + i * CELL;
            let ink = if v.abs() > 0.6 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}" data-row="{i}" data-col="{j}"/><text x="{}" y="{}" font-size="9" text-anchor="middle" dominant-baseline="middle" fill="{ink}">{:.2}</text>"##,
                x + CELL / 2,
                y + CELL / 2,
                v
            );
        }
    }
    let steps = 21;
    let width = n * CELL / steps;
    for k in 0..steps {
        let v = -1.0 + 2.0 * k as f64 / (steps - 1) as f64;
        let (r, g, b) = diverging_color(v);
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{legend_y}" width="{width}" height="12" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            MARGIN + k * width
        );
    }
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" font-size="10">-1</text>"#, legend_y + 26);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">+1</text>"#,
        MARGIN + steps * width,
        legend_y + 26
    );
    s.push_str("</svg>\n");
    s
}

pub fn render_heatmap(c: &CorrMatrix, out: &Path, note: Option<&str>) -> Result<String, BenchError> {
    let svg = heatmap_svg(c, note);
    fs::write(out, &svg).map_err(io_err(out))?;
    Ok(svg)
}

/// Writes `{suite}.csv` and `{suite}.md`.
pub fn emit_tables(rs: &ReportSet, out_dir: &Path, record_timing: bool) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join(format!("{}.csv", rs.suite));
    let md_path = out_dir.join(format!("{}.md", rs.suite));
    fs::write(&csv_path, report_csv(rs, record_timing)).map_err(io_err(&csv_path))?;
    fs::write(&md_path, report_markdown(rs, record_timing)).map_err(io_err(&md_path))?;
    Ok(vec![csv_path, md_path])
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub reports: Vec<ReportSet>,
    pub files: Vec<PathBuf>,
    pub correlation: Option<CorrMatrix>,
}

/// Runs every selected suite and writes its outputs. An empty selection
/// writes nothing.
pub fn run_bench(cfg: &BenchConfig, effective_config: Option<serde_json::Value>) -> Result<BenchOutcome, BenchError> {
    let mut outcome = BenchOutcome::default();
    if cfg.suites.is_empty() {
        log::info!("no suites selected; nothing to do");
        return Ok(outcome);
    }
    let ctx = BenchContext::load(cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let split_hash = ctx.split.content_hash();
    let prov = provenance_line(cfg.seed, &split_hash);
    let mut suite_details = serde_json::Map::new();
    for &suite in &cfg.suites {
        log::info!("running suite {suite}");
        match suite {
            Suite::Table1 => {
                let table = summarize(&ctx.dataset);
                let csv_path = cfg.out_dir.join("table1.csv");
                let md_path = cfg.out_dir.join("table1.md");
                fs::write(&csv_path, format!("# {prov}\n{}", table.to_csv())).map_err(io_err(&csv_path))?;
                fs::write(&md_path, format!("<!-- {prov} -->\n\n{}", table.to_markdown())).map_err(io_err(&md_path))?;
                outcome.files.extend([csv_path, md_path]);
            }
            Suite::Heatmap => {
                let corr = correlation_matrix(&ctx.dataset, true)?;
                let svg_path = cfg.out_dir.join("heatmap.svg");
                render_heatmap(&corr, &svg_path, Some(&prov))?;
                let csv_path = cfg.out_dir.join("correlation.csv");
                fs::write(&csv_path, format!("# {prov}\n{}", corr.to_csv())).map_err(io_err(&csv_path))?;
                outcome.files.extend([svg_path, csv_path]);
                outcome.correlation = Some(corr);
            }
            model_suite => {
                let rs = run_suite(&ctx, cfg, model_suite)?;
                outcome.files.extend(emit_tables(&rs, &cfg.out_dir, cfg.record_timing)?);
                let failures: Vec<_> = rs
                    .rows
                    .iter()
                    .filter_map(|r| r.outcome.as_ref().err().map(|e| json!({"config": r.config, "error": e})))
                    .collect();
                suite_details.insert(
                    model_suite.name().into(),
                    json!({"rows": rs.rows.len(), "details": rs.details, "failures": failures}),
                );
                outcome.reports.push(rs);
            }
        }
    }
    let provenance = json!({
        "seed": cfg.seed,
        "test_fraction": cfg.test_fraction,
        "cv_folds": cfg.cv_folds,
        "data": cfg.data,
        "data_sha256": ctx.data_sha256,
        "grid_version": grid_file()?.version,
        "split_sha256": split_hash,
        "split": {"train": ctx.split.train, "test": ctx.split.test},
        "pca_components": ctx.pca.k,
        "suites": suite_details,
        "config": effective_config.unwrap_or_else(|| serde_json::to_value(cfg).expect("config serializes")),
    });
    let prov_path = cfg.out_dir.join("provenance.json");
    let text = serde_json::to_string_pretty(&provenance).expect("json value serializes") + "\n";
    fs::write(&prov_path, text).map_err(io_err(&prov_path))?;
    outcome.files.push(prov_path);
    Ok(outcome)
}
