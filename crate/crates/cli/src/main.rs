//! `coxstream`: fit, test and stream Cox proportional hazards models over
//! block-arriving survival data.
//!
//! Exit status: 0 when every block was processed, 2 when some block failed
//! (its record carries the error), 1 on fatal configuration or I/O errors.

mod commands;
mod ingest;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coxstream::sim::Scenario;
use coxstream::{EvalPoint, HMode, Ties, TransformKind};

#[derive(Parser, Debug)]
#[command(name = "coxstream", version, about = "Online-updating Cox model fitting and proportional hazards tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the Cox model on all input blocks pooled together.
    Fit(FitArgs),
    /// Global proportional hazards test on all input blocks pooled together.
    TestFull(TestFullArgs),
    /// Process blocks one at a time, emitting one record per block.
    Stream(StreamArgs),
    /// Run a simulation study, or emit one simulated stream as CSV.
    Simulate(SimulateArgs),
    /// Permutation test of arrival order on the terminal cumulative statistic.
    Permute(PermuteArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Time transform g(t): identity, log or km.
    #[arg(long, default_value = "km")]
    transform: TransformKind,
    /// Tie handling: efron or breslow.
    #[arg(long, default_value = "efron")]
    ties: Ties,
}

/// Evaluation point policy for the summaries.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalPolicy {
    /// β̃ for the cumulative statistic, β̂ (CEE) for the window.
    PaperDefault,
    BlockMle,
    Fixed(Vec<f64>),
}

impl std::str::FromStr for EvalPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper-default" => Ok(Self::PaperDefault),
            "block-mle" => Ok(Self::BlockMle),
            _ => match s.strip_prefix("fixed:") {
                Some(list) => list
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad coefficient '{v}'")))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Self::Fixed),
                None => Err(format!("unknown eval policy '{s}' (paper-default | block-mle | fixed:b1,b2,...)")),
            },
        }
    }
}

impl EvalPolicy {
    pub fn points(&self) -> (EvalPoint, EvalPoint) {
        match self {
            Self::PaperDefault => (EvalPoint::Cuee, EvalPoint::Cee),
            Self::BlockMle => (EvalPoint::BlockMle, EvalPoint::BlockMle),
            Self::Fixed(b) => (EvalPoint::Fixed(b.clone()), EvalPoint::Fixed(b.clone())),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OutFormat {
    Jsonl,
    Csv,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV file, directory of CSV files, or `-` for stdin.
    input: String,
    #[arg(long, default_value = "efron")]
    ties: Ties,
}

#[derive(Args, Debug)]
struct TestFullArgs {
    /// CSV file, directory of CSV files, or `-` for stdin.
    input: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Variance of Q: simplified or exact.
    #[arg(long, default_value = "simplified")]
    h_mode: HMode,
}

#[derive(Args, Debug)]
struct StreamArgs {
    /// CSV file, directory of CSV files, or `-` for stdin.
    input: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Window width w.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    window: u64,
    /// Level used for the reject flags.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// paper-default (CUEE cumulative, CEE window), block-mle, or fixed:b1,b2,...
    #[arg(long, default_value = "paper-default")]
    eval_policy: EvalPolicy,
    /// State file: resumed from when present, rewritten after every block.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Record format on stdout.
    #[arg(long, value_enum, default_value_t = OutFormat::Jsonl)]
    out: OutFormat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Experiment {
    Size,
    Power,
    Qq,
    /// Print one simulated stream in the ingestion CSV format.
    Stream,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Experiment::Size)]
    experiment: Experiment,
    /// null, frailty:SIGMA or shift:DELTA.
    #[arg(long, default_value = "null")]
    scenario: Scenario,
    #[arg(long, default_value_t = 50)]
    blocks: usize,
    #[arg(long, default_value_t = 1000)]
    block_size: usize,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    /// Comma-separated true coefficients.
    #[arg(long, default_value = "0.67,-0.26,0.36", value_delimiter = ',', allow_hyphen_values = true)]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 0.018)]
    lambda0: f64,
    /// Weight of the censoring point mass at 60.
    #[arg(long, default_value_t = 0.9)]
    epsilon: f64,
    /// First block under the alternative.
    #[arg(long)]
    change_block: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// paper-default (CUEE cumulative, CEE window), block-mle, or fixed:b1,b2,...
    #[arg(long, default_value = "paper-default")]
    eval_policy: EvalPolicy,
    #[arg(long, default_value_t = 20_190_601)]
    seed: u64,
    /// Replicate emitted by `--experiment stream`.
    #[arg(long, default_value_t = 0)]
    replicate: usize,
    /// Checkpoints for the QQ experiment (default K/4, K/2, 3K/4, K).
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
    /// Run replicates on the calling thread only.
    #[arg(long)]
    sequential: bool,
    /// Directory for CSV outputs.
    #[arg(long, env = "COXSTREAM_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct PermuteArgs {
    /// CSV file, directory of CSV files, or `-` for stdin.
    input: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Number of random arrival orders.
    #[arg(long, default_value_t = 199)]
    n_perm: usize,
    #[arg(long, default_value_t = 20_190_601)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::TestFull(a) => commands::test_full(a),
        Command::Stream(a) => commands::stream(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Permute(a) => commands::permute(a),
    };
    match result {
        Ok(commands::Status::Clean) => ExitCode::SUCCESS,
        Ok(commands::Status::BlockErrors) => ExitCode::from(2),
        // downstream reader closed early (e.g. `| head`)
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coxstream: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    let pipe = |io: &std::io::Error| io.kind() == std::io::ErrorKind::BrokenPipe;
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(pipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|ce| matches!(ce.kind(), csv::ErrorKind::Io(io) if pipe(io)))
    })
}
