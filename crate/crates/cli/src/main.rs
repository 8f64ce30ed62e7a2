use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elimboost::experiments::{self, GenGapConfig, MetricsReport};
use elimboost::io::{self as eio, AnyModel, FORMAT_VERSION};
use elimboost::learnability::{self, LabelingMode, RHO_TOL};
use elimboost::synth::{Generator, GeneratorKind, DEFAULT_MARGIN};
use elimboost::{BoostError, Dataset, Execution, Result, StumpPool, TrainConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "elimboost", version, about = "Multi-class boosting by label elimination")]
struct Cli {
    /// Run every scan on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with a metrics report.
    Train(TrainArgs),
    /// Predict labels for a CSV of feature rows.
    Predict(PredictArgs),
    /// Error rate of a model on a labelled CSV.
    Eval(EvalArgs),
    /// Exact weak-learnability check of the stump pool for every label-subset size.
    CheckLearnability(CheckArgs),
    /// Eliminating ensemble against SAMME (and AdaBoost for two labels).
    Compare(CompareArgs),
    /// Two-point, three-label counterexample on which SAMME cannot separate.
    ReproMs13(Ms13Args),
    /// Per-round product of normalizers and fraction of targets not winning.
    Decay(DecayArgs),
    /// Median test-minus-training gap against sample size.
    GenGap(GenGapArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct BoostArgs {
    /// Minimum epoch length.
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    /// Per-epoch round limit; defaults to 50 K |A_i|.
    #[arg(long)]
    round_cap: Option<usize>,
    /// `axis`, `directions:<path>` or `constants:<labels>`.
    #[arg(long, default_value = "axis")]
    pool: String,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Labelled CSV with header `f0,...,f{d-1},label`.
    #[arg(long)]
    data: PathBuf,
    /// Size of the label alphabet, at least the largest label present.
    #[arg(long)]
    num_labels: Option<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum AlgorithmArg {
    Tau,
    Samme,
    Adaboost,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Tau)]
    algorithm: AlgorithmArg,
    /// Rounds for the baselines; defaults to K.
    #[arg(long)]
    rounds: Option<usize>,
    /// Fraction of rows held out for evaluation.
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    /// Seed for the holdout split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Metrics report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with header `f0,...,f{d-1}` and an optional `label` column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "axis")]
    pool: String,
    /// Check every labeling instead of the file's labels.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = RHO_TOL)]
    rho_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Ms13Args {
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    /// SAMME rounds.
    #[arg(long, default_value_t = 200)]
    samme_rounds: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SourceArgs {
    /// Labelled CSV; otherwise a synthetic set is drawn.
    #[arg(long, conflicts_with = "generator")]
    data: Option<PathBuf>,
    #[arg(long)]
    num_labels: Option<usize>,
    /// `interval` or `regions`.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenGapArgs {
    #[arg(long = "K", default_value_t = 20)]
    k: usize,
    #[arg(long)]
    round_cap: Option<usize>,
    /// First seed; seeds `seed..seed + seeds` are used.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 3)]
    num_labels: usize,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    test_size: usize,
    #[arg(long, default_value = "regions")]
    generator: String,
    /// CSV table; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary with the fit against 1/sqrt(m).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    generator: String,
    #[arg(long, default_value_t = 3)]
    num_labels: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure reported on stderr as one JSON line.
struct Failure {
    kind: String,
    code: u8,
    message: String,
}

impl From<BoostError> for Failure {
    fn from(e: BoostError) -> Self {
        let code = match &e {
            BoostError::WeakLearnabilityViolation { .. } | BoostError::EpochDivergence { .. } => 3,
            BoostError::Solver { .. } | BoostError::Numeric(_) => 1,
            _ => 2,
        };
        Failure {
            kind: e.kind().into(),
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        BoostError::Io(e).into()
    }
}

type CliResult = std::result::Result<(), Failure>;

fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> CliResult {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn train_config(boost: &BoostArgs, exec: Execution) -> Result<TrainConfig> {
    let mut config = TrainConfig::new(boost.k);
    config.round_cap = boost.round_cap;
    config.pool = eio::parse_pool_spec(&boost.pool)?;
    config.exec = exec;
    Ok(config)
}

fn load(data: &DataArgs) -> Result<Dataset> {
    eio::load_csv(&data.data, data.num_labels)
}

fn error_rate(predicted: &[usize], truth: &[usize]) -> f64 {
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    wrong as f64 / truth.len() as f64
}

fn cmd_train(a: &TrainArgs, exec: Execution) -> CliResult {
    let started = Instant::now();
    let data = load(&a.data)?;
    let (train_set, holdout) = experiments::holdout_split(&data, a.holdout, a.seed)?;
    let config = train_config(&a.boost, exec)?;
    let (model, report) = match a.algorithm {
        AlgorithmArg::Tau => {
            let model = elimboost::train(&train_set, &config)?;
            let mut report = MetricsReport::for_model(&model, holdout.as_ref())?;
            if a.timing {
                report.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
            }
            let report = serde_json::to_value(&report).expect("report encodes");
            (AnyModel::Tau(model), report)
        }
        AlgorithmArg::Samme | AlgorithmArg::Adaboost => {
            let rounds = a.rounds.unwrap_or(a.boost.k);
            let pool = StumpPool::build(train_set.features(), train_set.num_labels(), &config.pool)?;
            let (model, name) = match a.algorithm {
                AlgorithmArg::Samme => (elimboost::samme_train(&train_set, rounds, &pool, exec)?, "samme"),
                _ => (elimboost::adaboost_train(&train_set, rounds, &pool, exec)?, "adaboost"),
            };
            let holdout_error = holdout.as_ref().map(|h| model.error_on(h)).transpose()?;
            let mut report = json!({
                "format_version": FORMAT_VERSION,
                "algorithm": name,
                "num_labels": model.num_labels,
                "observations": train_set.len(),
                "rounds": model.rounds.len(),
                "perfect": model.perfect.is_some(),
                "training_error": model.error_on(&train_set)?,
                "holdout": holdout.as_ref().map(|h| json!({"size": h.len(), "error": holdout_error})),
            });
            if a.timing {
                report["wall_clock_seconds"] = json!(started.elapsed().as_secs_f64());
            }
            let model = match a.algorithm {
                AlgorithmArg::Samme => AnyModel::Samme(model),
                _ => AnyModel::Adaboost(model),
            };
            (model, report)
        }
    };
    eio::save_model(&a.out, &model)?;
    emit(a.report.as_deref(), |w| eio::write_json(w, &report))
}

fn cmd_predict(a: &PredictArgs) -> CliResult {
    let model = eio::load_model(&a.model)?;
    let features = eio::load_features(&a.data)?;
    let predictions = model.predict_all(&features)?;
    emit(a.out.as_deref(), |w| eio::write_predictions(w, &predictions))
}

fn cmd_eval(a: &EvalArgs) -> CliResult {
    let model = eio::load_model(&a.model)?;
    let data = eio::load_csv(&a.data, Some(model.num_labels()))?;
    let predictions = model.predict_all(data.features())?;
    let report = json!({
        "format_version": FORMAT_VERSION,
        "observations": data.len(),
        "num_labels": data.num_labels(),
        "error": error_rate(&predictions, data.labels()),
    });
    emit(a.out.as_deref(), |w| eio::write_json(w, &report))
}

fn cmd_check(a: &CheckArgs, exec: Execution) -> CliResult {
    let data = load(&a.data)?;
    let spec = eio::parse_pool_spec(&a.pool)?;
    let mode = if a.exhaustive {
        LabelingMode::Exhaustive
    } else {
        LabelingMode::Given(data.labels().to_vec())
    };
    let report = learnability::iterative_weak_learnability(
        data.features(),
        data.num_labels(),
        &spec,
        &mode,
        a.rho_tol,
        exec,
    )?;
    emit(a.out.as_deref(), |w| eio::write_json(w, &report))?;
    if report.verdict.is_pass() {
        return Ok(());
    }
    let worst = report
        .sizes
        .iter()
        .filter_map(|s| s.worst.as_ref())
        .min_by(|x, y| x.margin.total_cmp(&y.margin))
        .expect("a failing report has a checked size");
    Err(Failure {
        kind: "WeakLearnabilityViolation".into(),
        code: 3,
        message: format!(
            "pool is not weakly learnable over {} labels: value {} does not exceed {} by more than {}",
            worst.subset_size, worst.value, worst.threshold, a.rho_tol
        ),
    })
}

fn cmd_compare(a: &CompareArgs, exec: Execution) -> CliResult {
    let data = load(&a.data)?;
    let (train_set, holdout) = experiments::holdout_split(&data, a.holdout, a.seed)?;
    let config = train_config(&a.boost, exec)?;
    let report = experiments::compare(&train_set, holdout.as_ref(), &config)?;
    emit(a.out.as_deref(), |w| eio::write_json(w, &report))
}

fn cmd_ms13(a: &Ms13Args, exec: Execution) -> CliResult {
    let report = experiments::repro_ms13(a.samme_rounds, a.k, exec)?;
    emit(a.out.as_deref(), |w| eio::write_json(w, &report))?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure {
            kind: "ReproductionMismatch".into(),
            code: 1,
            message: "counterexample outcome differs from the expected one".into(),
        })
    }
}

fn source_dataset(s: &SourceArgs) -> Result<Dataset> {
    match (&s.data, &s.generator) {
        (Some(path), _) => eio::load_csv(path, s.num_labels),
        (None, Some(id)) => {
            let kind: GeneratorKind = id.parse()?;
            elimboost::synth::synth(kind, s.num_labels.unwrap_or(3), s.n, s.seed)
        }
        (None, None) => Err(BoostError::Contract("pass --data or --generator".into())),
    }
}

fn cmd_decay(a: &DecayArgs, exec: Execution) -> CliResult {
    let data = source_dataset(&a.source)?;
    let config = train_config(&a.boost, exec)?;
    let rows = experiments::decay(&data, &config)?;
    emit(a.out.as_deref(), |w| eio::write_table(w, &rows))
}

fn cmd_gen_gap(a: &GenGapArgs, exec: Execution) -> CliResult {
    let mut config = GenGapConfig::new(a.k);
    config.train.round_cap = a.round_cap;
    config.train.exec = exec;
    config.base_seed = a.seed;
    config.seeds = a.seeds;
    config.num_labels = a.num_labels;
    config.sizes = a.sizes.clone();
    config.test_size = a.test_size;
    config.kind = a.generator.parse()?;
    let report = experiments::gen_gap(&config)?;
    emit(a.out.as_deref(), |w| eio::write_table(w, &report.rows))?;
    if let Some(path) = &a.report {
        emit(Some(path), |w| eio::write_json(w, &report))?;
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let kind: GeneratorKind = a.generator.parse()?;
    let generator = Generator::new(kind, a.num_labels, a.margin, a.seed)?;
    let data = generator.sample(a.n, &mut elimboost::synth::sample_rng(a.seed, 0))?;
    emit(a.out.as_deref(), |w| eio::write_dataset(w, &data))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let message = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let line = json!({"error": "UsageError", "exit_code": 2, "message": message});
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, exec),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::CheckLearnability(a) => cmd_check(a, exec),
        Command::Compare(a) => cmd_compare(a, exec),
        Command::ReproMs13(a) => cmd_ms13(a, exec),
        Command::Decay(a) => cmd_decay(a, exec),
        Command::GenGap(a) => cmd_gen_gap(a, exec),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = json!({"error": f.kind, "exit_code": f.code, "message": f.message});
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}
