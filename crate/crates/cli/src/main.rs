//! `dares`: run the recommender pipeline on a dataset described by a DsDL
//! file, or just validate the description.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 internal
//! error.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dares_core::autotune::{SplitPolicy, SplitSettings, Strategy, DEFAULT_HOLDOUT_FRACTION, DEFAULT_RANDOM_TRIALS};
use dares_core::dsdl::{parse_dsdl_with, ParseOptions};
use dares_core::ingest::{load_dataset_from_bytes, Dataset, LoadOptions};
use dares_core::pipeline::{run_pipeline, LogEntry, LogKind, RunConfig, RunOutcome};
use dares_core::preprocess::PreprocessOptions;
use dares_core::{task_compatibility, Diagnostic, DsdlSchema, TaskKind};

use report::{build_report, InputDigest};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "dares", version, about = "Dataset-agnostic recommender pipeline driven by a DsDL file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess, tune, select and evaluate a model for the given task.
    Run(RunArgs),
    /// Parse and validate a DsDL file, optionally against a data file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Ctr,
    Rating,
    #[value(name = "top_n")]
    TopN,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Ctr => TaskKind::Ctr,
            TaskArg::Rating => TaskKind::Rating,
            TaskArg::TopN => TaskKind::TopN,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Grid,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Auto,
    Kfold,
    Temporal,
}

#[derive(Args)]
struct RunArgs {
    /// Training data (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// DsDL file describing the data.
    #[arg(long)]
    dsdl: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Optional test set with the same columns; labels may be absent.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "dares-report.json")]
    out: PathBuf,
    /// Where to write test predictions (only with --test).
    #[arg(long, default_value = "dares-predictions.csv")]
    predictions: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "grid")]
    strategy: StrategyArg,
    /// Trials for random search.
    #[arg(long, default_value_t = DEFAULT_RANDOM_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    k_folds: usize,
    #[arg(long, value_enum, default_value = "auto")]
    split: SplitArg,
    /// Fraction of rows held out by a temporal split.
    #[arg(long, default_value_t = DEFAULT_HOLDOUT_FRACTION)]
    holdout_fraction: f64,
    /// Label to learn when the DsDL declares several.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    noise_z: f64,
    #[arg(long, default_value_t = 1024)]
    hash_dim: usize,
    /// Recommendations per user in the predictions file.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Drop exact duplicate rows before training.
    #[arg(long)]
    dedup: bool,
    /// Treat unknown DsDL keys as warnings.
    #[arg(long)]
    lax: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dsdl: PathBuf,
    /// Also check that this CSV binds to the declared columns.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    lax: bool,
}

/// A failed command: diagnostics to print and the exit code.
struct Failure {
    code: u8,
    lines: Vec<String>,
}

impl Failure {
    fn data(lines: Vec<String>) -> Self {
        Failure { code: EXIT_DATA, lines }
    }

    fn internal(line: String) -> Self {
        Failure { code: EXIT_INTERNAL, lines: vec![line] }
    }

    fn usage(line: String) -> Self {
        Failure { code: EXIT_USAGE, lines: vec![line] }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::data(vec![format!("error[Io] {}: {e}", display(path))]))
}

fn load_schema(path: &Path, lax: bool) -> Result<(Vec<u8>, DsdlSchema, Vec<Diagnostic>), Failure> {
    let bytes = read_input(path)?;
    match parse_dsdl_with(&bytes, &ParseOptions { lax }) {
        Ok(parsed) => Ok((bytes, parsed.schema, parsed.warnings)),
        Err(diags) => Err(Failure::data(diags.iter().map(|d| d.render(&display(path))).collect())),
    }
}

fn load_data(path: &Path, bytes: &[u8], schema: &DsdlSchema, labels_optional: bool) -> Result<Dataset, Failure> {
    load_dataset_from_bytes(bytes, schema, &LoadOptions { labels_optional })
        .map_err(|errs| Failure::data(errs.iter().map(|e| e.to_diagnostic().render(&display(path))).collect()))
}

fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var("DARES_THREADS") {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("error: DARES_THREADS must be a non-negative integer, got `{v}`"))),
    }
}

fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let (_, schema, warnings) = load_schema(&args.dsdl, args.lax)?;
    for w in &warnings {
        eprintln!("{}", w.render(&display(&args.dsdl)));
    }
    if let Some(data) = &args.data {
        let bytes = read_input(data)?;
        let ds = load_data(data, &bytes, &schema, false)?;
        println!("{}: {} rows bind to the declared columns", display(data), ds.row_count());
    }
    println!(
        "{}: ok ({} features, {} labels{}{}{})",
        display(&args.dsdl),
        schema.features().len(),
        schema.labels().len(),
        schema.user_id().map_or(String::new(), |c| format!(", user_id {}", c)),
        schema.item_id().map_or(String::new(), |c| format!(", item_id {}", c)),
        schema.timestamp().map_or(String::new(), |c| format!(", timestamp {}", c)),
    );
    Ok(())
}

fn summary(outcome: &RunOutcome, out: &Path, predictions: Option<&Path>) -> String {
    let w = outcome.winner_trial();
    let mut s = format!(
        "task {} on {} usable rows\n{} trials, selection metric {}\nwinner: {} ({}) cv {} = {}\n",
        outcome.task.kind,
        outcome.usable_rows,
        outcome.trials.len(),
        outcome.selection_metric,
        w.model_id,
        if w.hyperparameters.0.is_empty() { "no hyperparameters".to_string() } else { w.hyperparameters.to_string() },
        outcome.selection_metric,
        w.mean_score,
    );
    if let Some(t) = &outcome.test {
        for (name, m) in &t.metrics.metrics {
            match (m.value, &m.reason) {
                (Some(v), _) => s.push_str(&format!("test {name} = {v:.6}\n")),
                (None, Some(r)) => s.push_str(&format!("test {name} = null ({r})\n")),
                (None, None) => s.push_str(&format!("test {name} = null\n")),
            }
        }
    }
    let failed = outcome.log.iter().filter(|e| e.kind == LogKind::FailedTrial).count();
    if failed > 0 {
        s.push_str(&format!("{failed} trials failed; see the decision log\n"));
    }
    s.push_str(&format!("report written to {}\n", display(out)));
    if let Some(p) = predictions {
        s.push_str(&format!("predictions written to {}\n", display(p)));
    }
    s
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    if !(args.holdout_fraction > 0.0 && args.holdout_fraction < 1.0) {
        return Err(Failure::usage(format!("error: --holdout-fraction must be in (0, 1), got {}", args.holdout_fraction)));
    }
    if args.top_k == 0 {
        return Err(Failure::usage("error: --top-k must be at least 1".into()));
    }
    let threads = threads_from_env()?;
    let (dsdl_bytes, schema, warnings) = load_schema(&args.dsdl, args.lax)?;
    for w in &warnings {
        eprintln!("{}", w.render(&display(&args.dsdl)));
    }
    let task = task_compatibility(&schema, args.task.into(), args.label.as_deref()).map_err(|errs| {
        Failure::data(errs.iter().map(|e| format!("error[{}] {}: {e}", e.code(), display(&args.dsdl))).collect())
    })?;

    let data_bytes = read_input(&args.data)?;
    let train = load_data(&args.data, &data_bytes, &schema, task.kind == TaskKind::TopN)?;
    let test = match &args.test {
        Some(p) => {
            let bytes = read_input(p)?;
            let ds = load_data(p, &bytes, &schema, true)?;
            Some((bytes, ds))
        }
        None => None,
    };

    let config = RunConfig {
        seed: args.seed,
        strategy: match args.strategy {
            StrategyArg::Grid => Strategy::Grid,
            StrategyArg::Random => Strategy::Random { n_trials: args.trials },
        },
        split: SplitSettings {
            policy: match args.split {
                SplitArg::Auto => SplitPolicy::Auto,
                SplitArg::Kfold => SplitPolicy::Kfold,
                SplitArg::Temporal => SplitPolicy::Temporal,
            },
            k: args.k_folds,
            holdout_fraction: args.holdout_fraction,
            seed: args.seed,
        },
        preprocess: PreprocessOptions { noise_z: args.noise_z, hash_dim: args.hash_dim, dedup_rows: args.dedup },
        top_k: args.top_k,
        threads,
    };

    let mut outcome = run_pipeline(&train, test.as_ref().map(|(_, d)| d), &task, &config).map_err(|e| {
        let line = format!("error[{}] {}: {e}", e.code(), display(&args.data));
        if e.is_internal() {
            Failure::internal(line)
        } else {
            Failure::data(vec![line])
        }
    })?;
    for (i, w) in warnings.iter().enumerate() {
        outcome.log.insert(i, LogEntry::new(LogKind::Warning, "dsdl", w.render("dsdl")));
    }

    let mut inputs = vec![InputDigest::of("dsdl", &dsdl_bytes), InputDigest::of("data", &data_bytes)];
    if let Some((bytes, _)) = &test {
        inputs.push(InputDigest::of("test", bytes));
    }
    let report = build_report(&inputs, &schema, &config, train.row_count(), &outcome);
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::internal(format!("error[Internal] {e}")))?;
    fs::write(&args.out, text + "\n")
        .map_err(|e| Failure::internal(format!("error[Io] cannot write {}: {e}", display(&args.out))))?;

    let mut predictions_path = None;
    if let Some(t) = &outcome.test {
        let file = fs::File::create(&args.predictions)
            .map_err(|e| Failure::internal(format!("error[Io] cannot write {}: {e}", display(&args.predictions))))?;
        t.predictions
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Failure::internal(format!("error[Io] cannot write {}: {e}", display(&args.predictions))))?;
        predictions_path = Some(args.predictions.as_path());
    }
    print!("{}", summary(&outcome, &args.out, predictions_path));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = std::panic::catch_unwind(|| match &cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => validate(a),
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            for line in &f.lines {
                eprintln!("{line}");
            }
            ExitCode::from(f.code)
        }
        Err(_) => {
            eprintln!("error[Internal] unexpected failure; please report this with the inputs that caused it");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
