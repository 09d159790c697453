//! `csp`: conformal structured prediction over DAGs from the command line.
//!
//! Subcommands build DAGs, calibrate coverage thresholds, compute structured
//! prediction sets, evaluate them on held-out records, and run hyperparameter
//! sweeps. Every invocation is a pure function of its input files, flags, and
//! seed: reruns produce byte-identical outputs regardless of `--jobs`.
//!
//! Exit codes: 0 success, 2 config/parse/validation error, 3 sentinel
//! fallback under `--strict`, 4 infeasible optimization. Diagnostics are a
//! single `error: <code> <message>` line on stderr.

mod commands;
mod errors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use errors::CliError;

#[derive(Parser)]
#[command(
    name = "csp",
    version,
    about = "Conformal structured prediction sets over DAGs"
)]
struct Cli {
    /// Worker threads for per-record solves (results are identical for any
    /// value).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a DAG and write it in the DAG JSON format.
    BuildDag(BuildDagArgs),
    /// Calibrate the coverage threshold on labeled records.
    Calibrate(CalibrateArgs),
    /// Compute the minimum-size structured prediction set per record.
    Predict(PredictArgs),
    /// Evaluate coverage and set size on labeled test records.
    Evaluate(EvaluateArgs),
    /// Run a calibrate/measure sweep over a hyperparameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DagKind {
    DigitTree,
    Interval,
    FromFile,
}

#[derive(Args)]
struct BuildDagArgs {
    /// digit-tree, interval, or from-file.
    #[arg(long, value_enum)]
    kind: DagKind,
    /// Digit positions (digit-tree).
    #[arg(long)]
    k: Option<u32>,
    /// Alphabet size (digit-tree).
    #[arg(long, default_value_t = 10)]
    alphabet: u32,
    /// Lower bound (interval).
    #[arg(long)]
    lo: Option<i64>,
    /// Upper bound (interval).
    #[arg(long)]
    hi: Option<i64>,
    /// Hierarchy file: DAG JSON or tab-separated parent/child lines
    /// (from-file).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    dag: PathBuf,
    /// Calibration records (JSONL with true_leaf).
    #[arg(long)]
    records: PathBuf,
    /// Calibration config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    guarantee: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    /// Comma-separated descending thresholds overriding the default grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Validate score sums leniently (<= 1 instead of == 1).
    #[arg(long)]
    lenient: bool,
    /// Exit 3 when calibration falls back to the full-set sentinel.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    dag: PathBuf,
    /// Score records (JSONL; true_leaf optional and ignored).
    #[arg(long)]
    records: PathBuf,
    /// Coverage threshold.
    #[arg(long)]
    tau: f64,
    /// Maximum number of selected nodes.
    #[arg(long, default_value_t = 4)]
    m: u32,
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dag: PathBuf,
    /// Test records (JSONL with true_leaf).
    #[arg(long)]
    records: PathBuf,
    /// Threshold to evaluate at (alternative to --calibration).
    #[arg(long)]
    tau: Option<f64>,
    /// Calibration outcome JSON; supplies tau_hat (possibly the sentinel).
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    m: u32,
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dag: PathBuf,
    /// Generator spec JSON (must carry a finite atom count).
    #[arg(long)]
    generator: PathBuf,
    /// Sweep config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed overriding the config seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override.
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CSP_LOG")).init();
    let cli = Cli::parse();
    let jobs = cli.jobs.max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: jobs {e}");
            return ExitCode::from(2);
        }
    };
    let result: Result<(), CliError> = pool.install(|| match cli.command {
        Command::BuildDag(args) => commands::build_dag(args),
        Command::Calibrate(args) => commands::calibrate(args),
        Command::Predict(args) => commands::predict(args),
        Command::Evaluate(args) => commands::evaluate_cmd(args),
        Command::Sweep(args) => commands::sweep(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit)
        }
    }
}
