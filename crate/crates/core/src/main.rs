use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pdbench::bench::{self, BenchConfig, Suite};
use pdbench::ingest::{self, correlation_matrix, load_dataset, parse_scoring_input, summarize};
use pdbench::linear_models::{train_logreg, Solver, SolverConfig};
use pdbench::metrics::evaluate;
use pdbench::model_io::{load_model, save_model, ModelFile, Preprocessing, TrainedModel};
use pdbench::neural::{train_neural, Activation, NetKind, NeuralSpec};
use pdbench::preprocess::{fit_pca, fit_scaler, stratified_split, DEFAULT_TEST_FRACTION, DEFAULT_VARIANCE_TARGET};
use pdbench::rng::DEFAULT_SEED;
use pdbench::svm::{gamma_scale, train_svm, Kernel, KernelKind, DEFAULT_TOL};
use pdbench::tree_ensembles::{train_forest, train_gbdt, BoostStyle, ForestParams, GbdtParams};
use pdbench::FeatureMatrix;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MODEL: u8 = 4;
const DATA_ENV: &str = "PDBENCH_DATA";

/// Parkinson's voice-measurement classification benchmarks.
#[derive(Debug, Parser)]
#[command(name = "pdbench", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a data file parses and report class counts.
    Validate(DataArg),
    /// Per-feature summary statistics.
    Summarize(SummarizeArgs),
    /// Render the correlation heatmap as SVG.
    Heatmap(HeatmapArgs),
    /// Train one model and save it with its preprocessing chain.
    Train(TrainArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Run benchmark suites and write reports.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct DataArg {
    /// Data CSV (falls back to $PDBENCH_DATA).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long, value_enum, default_value = "markdown")]
    format: TableFormat,
    /// Also print the correlation matrix.
    #[arg(long)]
    correlations: bool,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long, default_value = "heatmap.svg")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Logreg,
    Svm,
    Forest,
    Gbdt,
    Neural,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[command(flatten)]
    data: DataArg,
    /// Output model file.
    #[arg(long)]
    save: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Reduce standardized features with PCA at 95% explained variance.
    #[arg(long)]
    pca: bool,
    /// Fit on the training part of the stratified split and report test
    /// metrics, instead of fitting on every row.
    #[arg(long)]
    holdout: bool,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    /// Regularization C (logreg, svm).
    #[arg(long = "c", default_value_t = 10.0)]
    c: f64,
    #[arg(long, default_value = "newton")]
    solver: String,
    #[arg(long, default_value = "rbf")]
    kernel: String,
    /// Kernel gamma; defaults to 1 / (d * mean feature variance).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    n_estimators: usize,
    /// Tree depth; `None` grows forest trees until pure.
    #[arg(long)]
    max_depth: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value = "classic")]
    style: String,
    #[arg(long, default_value = "fnn")]
    net: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    activation: Option<String>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// CSV to score; needs the name column and every feature column.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArg,
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated suites, or `all`.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the timing column empty so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

/// Keys accepted in a bench config file.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    suite: Option<String>,
    seed: Option<u64>,
    test_fraction: Option<f64>,
    cv_folds: Option<usize>,
    out: Option<PathBuf>,
    record_timing: Option<bool>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow!(msg.into()),
    }
}

trait Classify<T> {
    fn data_err(self) -> Result<T, Failure>;
    fn model_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_DATA,
            error: e.into(),
        })
    }

    fn model_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_MODEL,
            error: e.into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let verbs: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
                    eprintln!("error: {}", e.kind());
                    if let Some(clap::error::ContextValue::String(bad)) = e.get(clap::error::ContextKind::InvalidSubcommand) {
                        eprintln!("unknown verb `{bad}`");
                    }
                    eprintln!("valid verbs: {}", verbs.join(", "));
                    ExitCode::from(EXIT_USAGE)
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(EXIT_USAGE)
                }
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate(a) => validate(a),
        Command::Summarize(a) => summarize_cmd(a),
        Command::Heatmap(a) => heatmap_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn resolve_data(flag: Option<PathBuf>, config: Option<PathBuf>) -> Result<PathBuf, Failure> {
    flag.or(config)
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .ok_or_else(|| usage(format!("missing --data (or set {DATA_ENV})")))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).data_err(),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout").data_err(),
    }
}

fn validate(a: DataArg) -> Result<(), Failure> {
    let path = resolve_data(a.data, None)?;
    let ds = load_dataset(&path).data_err()?;
    let [healthy, pd] = ds.class_counts();
    println!("{}: {} records, {} features", path.display(), ds.len(), ingest::FEATURE_NAMES.len());
    println!("status=1 (PD): {pd}, status=0 (healthy): {healthy}");
    if let Some(note) = ds.reported_count_discrepancy() {
        println!("note: {note}");
    }
    Ok(())
}

fn summarize_cmd(a: SummarizeArgs) -> Result<(), Failure> {
    let ds = load_dataset(resolve_data(a.data.data, None)?).data_err()?;
    let table = summarize(&ds);
    let mut text = match a.format {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Markdown => table.to_markdown(),
    };
    if a.correlations {
        let corr = correlation_matrix(&ds, true).data_err()?;
        text.push('\n');
        text.push_str(&match a.format {
            TableFormat::Csv => corr.to_csv(),
            TableFormat::Markdown => corr.to_markdown(),
        });
    }
    write_output(a.out.as_deref(), &text)
}

fn heatmap_cmd(a: HeatmapArgs) -> Result<(), Failure> {
    let ds = load_dataset(resolve_data(a.data.data, None)?).data_err()?;
    let corr = correlation_matrix(&ds, true).data_err()?;
    bench::render_heatmap(&corr, &a.out, None).data_err()?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn parse_depth(s: Option<&str>) -> Result<Option<usize>, Failure> {
    match s {
        None => Ok(None),
        Some(v) if v.eq_ignore_ascii_case("none") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("--max-depth expects an integer or None, got `{v}`"))),
    }
}

fn fit_model(a: &TrainArgs, x: &FeatureMatrix) -> Result<TrainedModel, Failure> {
    let depth = parse_depth(a.max_depth.as_deref())?;
    Ok(match a.model {
        ModelKind::Logreg => {
            let solver: Solver = a.solver.parse().map_err(|e| usage(format!("--solver: {e}")))?;
            let cfg = SolverConfig::new(solver).with_seed(a.seed);
            TrainedModel::Logreg(train_logreg(x, a.c, &cfg).model_err()?)
        }
        ModelKind::Svm => {
            let kind: KernelKind = a.kernel.parse().map_err(|e| usage(format!("--kernel: {e}")))?;
            let gamma = a.gamma.unwrap_or_else(|| gamma_scale(x.values()));
            TrainedModel::Svm(train_svm(x, a.c, Kernel::with_defaults(kind, gamma), DEFAULT_TOL).model_err()?)
        }
        ModelKind::Forest => {
            let params = ForestParams::new(a.n_estimators, depth, a.seed);
            TrainedModel::Forest(train_forest(x, &params).model_err()?)
        }
        ModelKind::Gbdt => {
            let style: BoostStyle = a.style.parse().map_err(|e| usage(format!("--style: {e}")))?;
            let mut params = GbdtParams::new(style, a.n_estimators, a.learning_rate, depth.unwrap_or(3));
            params.seed = a.seed;
            TrainedModel::Gbdt(train_gbdt(x, &params).model_err()?)
        }
        ModelKind::Neural => {
            let kind: NetKind = a.net.parse().map_err(|e| usage(format!("--net: {e}")))?;
            let mut spec = NeuralSpec::default_for(kind);
            spec.seed = a.seed;
            if let Some(e) = a.epochs {
                spec.epochs = e;
            }
            if let Some(act) = &a.activation {
                spec.activation = act.parse::<Activation>().map_err(|e| usage(format!("--activation: {e}")))?;
            }
            TrainedModel::from_neural(&train_neural(x, &spec).model_err()?)
        }
    })
}

fn accuracy(truth: &[u8], pred: &[u8]) -> Result<f64, Failure> {
    Ok(evaluate(truth, pred).model_err()?.accuracy())
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let path = resolve_data(a.data.data.clone(), None)?;
    let ds = load_dataset(&path).data_err()?;
    let all = ds.to_feature_matrix();
    let (fit_rows, holdout_rows) = if a.holdout {
        let split = stratified_split(all.labels(), a.test_fraction, a.seed).data_err()?;
        (all.select_rows(&split.train), Some(all.select_rows(&split.test)))
    } else {
        (all.clone(), None)
    };
    let scaler = fit_scaler(&fit_rows).data_err()?;
    let mut x = scaler.apply(&fit_rows).data_err()?;
    let pca = if a.pca {
        let p = fit_pca(&x, DEFAULT_VARIANCE_TARGET).data_err()?;
        x = p.apply(&x).data_err()?;
        log::info!("PCA kept {} components", p.k);
        Some(p)
    } else {
        None
    };
    let model = fit_model(&a, &x)?;
    let mut file = ModelFile::new(all.columns().to_vec(), Preprocessing { scaler, pca }, model);
    file.seed = Some(a.seed);
    let (_, train_pred) = file.predict_raw(fit_rows.values()).model_err()?;
    let train_acc = accuracy(fit_rows.labels(), &train_pred)?;
    file.train_accuracy = Some(train_acc);
    println!("{} trained; training accuracy {:.4}", file.model.kind(), train_acc);
    if let Some(test) = holdout_rows {
        let (_, pred) = file.predict_raw(test.values()).model_err()?;
        let r = evaluate(test.labels(), &pred).model_err()?;
        println!("holdout accuracy {} precision {}", r.accuracy_str(), r.precision_str());
    }
    save_model(&file, &a.save).model_err()?;
    eprintln!("saved {}", a.save.display());
    Ok(())
}

fn csv_header(path: &Path) -> Result<Vec<String>, Failure> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display())).data_err()?;
    let header = rdr.headers().context("reading CSV header").data_err()?;
    Ok(header.iter().map(|h| h.trim().to_string()).collect())
}

fn predict_cmd(a: PredictArgs) -> Result<(), Failure> {
    let model = load_model(&a.model).model_err()?;
    let header = csv_header(&a.input)?;
    let missing = model.missing_columns(&header);
    if !missing.is_empty() {
        return Err(pdbench::model_io::ModelIoError::SchemaMismatch(missing)).data_err();
    }
    let file = fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display())).data_err()?;
    let input = parse_scoring_input(file).data_err()?;
    let (probs, labels) = model.predict_raw(input.features.view()).model_err()?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let write_err = |e: csv::Error| Failure {
        code: EXIT_DATA,
        error: e.into(),
    };
    w.write_record(["name", "probability", "label"]).map_err(write_err)?;
    for (i, name) in input.names.iter().enumerate() {
        let p = probs.as_ref().map_or(String::new(), |p| format!("{}", p[i]));
        w.write_record([name.as_str(), &p, &labels[i].to_string()]).map_err(write_err)?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| usage(e.to_string()))?).expect("utf-8 output");
    if let Some(truth) = &input.status {
        let acc = accuracy(truth, &labels)?;
        log::info!("accuracy against the status column: {acc:.4}");
    }
    write_output(a.out.as_deref(), &text)
}

fn bench_cmd(a: BenchArgs) -> Result<(), Failure> {
    let file_cfg: FileConfig = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).data_err()?;
            toml::from_str(&text).map_err(|e| usage(format!("--config {}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let data = resolve_data(a.data.data, file_cfg.data)?;
    let out = a.out.or(file_cfg.out).unwrap_or_else(|| PathBuf::from("results"));
    let mut cfg = BenchConfig::new(data, out);
    cfg.seed = a.seed.or(file_cfg.seed).unwrap_or(DEFAULT_SEED);
    cfg.test_fraction = a.test_fraction.or(file_cfg.test_fraction).unwrap_or(DEFAULT_TEST_FRACTION);
    cfg.cv_folds = a.cv_folds.or(file_cfg.cv_folds).unwrap_or(cfg.cv_folds);
    cfg.record_timing = if a.no_timing { false } else { file_cfg.record_timing.unwrap_or(true) };
    let selection = a.suite.or(file_cfg.suite).unwrap_or_else(|| "all".to_string());
    cfg.suites = Suite::parse_selection(&selection).map_err(|e| usage(format!("--suite: {e}")))?;
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(usage(format!("--test-fraction must be in (0, 1), got {}", cfg.test_fraction)));
    }
    if cfg.cv_folds < 2 {
        return Err(usage(format!("--cv-folds must be at least 2, got {}", cfg.cv_folds)));
    }
    if cfg.suites.is_empty() {
        eprintln!("no suites selected; nothing written");
        return Ok(());
    }
    let effective = serde_json::to_value(&cfg).expect("config serializes");
    let outcome = bench::run_bench(&cfg, Some(effective)).data_err()?;
    for rs in &outcome.reports {
        let failed = rs.rows.iter().filter(|r| r.outcome.is_err()).count();
        let best = rs.best_accuracy().map_or("n/a".to_string(), |b| format!("{b:.4}"));
        println!("{:<15} {:>3} rows  best accuracy {best}  failed {failed}", rs.suite.name(), rs.rows.len());
    }
    eprintln!("wrote {} files to {}", outcome.files.len(), cfg.out_dir.display());
    Ok(())
}
