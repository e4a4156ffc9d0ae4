//! Batch front end for the careless-responding onset detector.
//!
//! Four subcommands cover the workflow: `simulate` produces survey data
//! with known ground truth, `detect` flags respondents and estimates the
//! onset of careless responding, `screen` runs the classical screeners,
//! and `study` pools detection error rates over a replicated condition
//! grid. Every run writes a JSON manifest recording inputs, resolved
//! configuration, outputs, and timings; rerunning with the recorded
//! configuration reproduces each data file byte-for-byte.

mod config;
mod detect;
mod emit;
mod manifest;
mod screen;
mod simulate_cmd;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Careless-responding detection toolkit for long rating-scale surveys.
///
/// Reads flat `key = value` configuration files; command-line flags
/// override file entries. Control log verbosity with
/// CODERS_LOG={error|info|debug}.
#[derive(Parser)]
#[command(name = "coders", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key = value configuration file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for all output files (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Worker-thread cap for the respondent-parallel stages.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Flag respondents and estimate each onset item.
    Detect(DetectArgs),
    /// Generate a survey with known careless-responding ground truth.
    Simulate(SimulateArgs),
    /// Run the classical screeners (longstring, reliability, antonyms).
    Screen(ScreenArgs),
    /// Replicate simulate + detect + evaluate over a condition grid.
    Study(StudyArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Responses CSV: one respondent per row, one item per column.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Design CSV (item,construct,keying); required whenever the
    /// reconstruction-error signal is used.
    #[arg(long, value_name = "FILE")]
    design: Option<PathBuf>,

    /// Test level: one of 0.01, 0.005, 0.001.
    #[arg(long)]
    alpha: Option<f64>,

    /// Signals to test jointly: both, re, or lsp.
    #[arg(long)]
    dims: Option<String>,

    /// Largest repeat length searched by the pattern score.
    #[arg(long)]
    l_max: Option<usize>,

    /// Master seed for jitter and network initialization.
    #[arg(long)]
    seed: Option<u64>,

    /// Also write every respondent's test series.
    #[arg(long)]
    emit_series: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Master seed; required here or in the configuration file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScreenArgs {
    /// Responses CSV: one respondent per row, one item per column.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Design CSV; required for the personal-reliability screener.
    #[arg(long, value_name = "FILE")]
    design: Option<PathBuf>,

    /// Run the longstring screener (default: every available screener).
    #[arg(long)]
    longstring: bool,

    /// Run the personal-reliability screener.
    #[arg(long)]
    reliability: bool,

    /// Run the psychometric-antonym screener.
    #[arg(long)]
    antonym: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Master seed; required here or in the configuration file.
    #[arg(long)]
    seed: Option<u64>,

    /// Single test level overriding the `alphas` grid.
    #[arg(long)]
    alpha: Option<f64>,

    /// Single variant overriding the `dims` grid: both, re, or lsp.
    #[arg(long)]
    dims: Option<String>,

    /// Largest repeat length searched by the pattern score.
    #[arg(long)]
    l_max: Option<usize>,

    /// Replicates per condition.
    #[arg(long)]
    replicates: Option<usize>,
}

/// A command failure carrying its process exit code: 2 for configuration
/// problems, 3 for data problems or unavailable screeners, 4 for a failed
/// study replicate.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Failure {
        Failure { code: 3, message: message.into() }
    }
}

impl From<coders::Error> for Failure {
    fn from(e: coders::Error) -> Failure {
        let code = match e {
            coders::Error::Config(_) | coders::Error::UntabulatedCriticalValue { .. } => 2,
            coders::Error::Study { .. } => 4,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CODERS_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("coders: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("coders: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Detect(args) => detect::run(&cli, args),
        Command::Simulate(args) => simulate_cmd::run(&cli, args),
        Command::Screen(args) => screen::run(&cli, args),
        Command::Study(args) => study::run(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("coders: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
