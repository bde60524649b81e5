//! `alertchain` — runs the alert-analysis pipeline stage by stage:
//! normalize raw IDS alerts, score and rank detectors, filter low-value
//! alerts, aggregate the rest into meta-alerts, extract per-victim attack
//! graphs, and summarize a run.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

/// Exit codes: 2 configuration, 3 ingestion, 4 processing.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn ingest(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }

    pub fn processing(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }

    pub fn from_config(e: alertchain::Error) -> Self {
        CliError::config(e.to_string())
    }

    pub fn from_ingest(e: alertchain::Error) -> Self {
        match e {
            alertchain::Error::Config(_) => CliError::from_config(e),
            other => CliError::ingest(other.to_string()),
        }
    }

    pub fn from_processing(e: alertchain::Error) -> Self {
        match e {
            alertchain::Error::Config(_) => CliError::from_config(e),
            other => CliError::processing(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "alertchain",
    version,
    about = "Normalize, score, filter, aggregate, and graph IDS alerts from multi-step attack scenarios",
    after_help = "Artifacts land in the output directory; each stage reads the previous stage's \
                  files, so runs are resumable. The data root may also be set via ALERTCHAIN_DATA_ROOT."
)]
struct Cli {
    /// Pipeline configuration file (JSON); flags override its values
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw alert files into the normalized store
    Normalize,
    /// Rank detectors by robustness and detection score
    Score,
    /// Apply the score and attack-window filters
    Filter,
    /// Merge similar alert groups into meta-alerts
    Aggregate,
    /// Build per-victim attack graphs as DOT files
    Graph,
    /// Summarize all artifacts of a run
    Report,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(jobs) = config.jobs {
        if jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        if !alertchain::configure_workers(jobs) {
            log::debug!("worker pool already configured or parallelism disabled");
        }
    }
    match cli.command {
        Command::Normalize => commands::normalize(&config),
        Command::Score => commands::score(&config),
        Command::Filter => commands::filter(&config),
        Command::Aggregate => commands::aggregate(&config),
        Command::Graph => commands::graph(&config),
        Command::Report => commands::report(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
