//! `contextspace`: rank context features, select a subspace, fit a loss map and
//! predict expected loss in operating domains, with JSON/CSV artifacts.

mod artifacts;
mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contextspace_core::data::DEFAULT_BINS;
use contextspace_core::selection::{DEFAULT_ITERATIONS, DEFAULT_SPLIT};

use crate::error::EXIT_VALIDATION;

#[derive(Parser)]
#[command(name = "contextspace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank context features by greedy redundancy-penalized mutual information.
    Rank(DataArgs),
    /// Choose the subspace dimensionality from repeated fit/validation splits.
    SelectK(DataArgs),
    /// Fit the per-cell expected loss over the selected subspace.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Use the top `K` ranked features instead of selecting `K`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Predict the expected loss of operating domains from a fitted loss map.
    Predict(PredictArgs),
    /// Generate a synthetic scenario with analytic ground truth.
    Synth(SynthArgs),
    /// Render a markdown report with SVG heatmaps from an artifact directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// Test-set CSV with one loss column and context feature columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "loss")]
    pub loss_column: String,
    /// Uniform bins per numerical feature.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Number of features to rank; defaults to min(features, 6).
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Fraction of rows in the fit partition of each split.
    #[arg(long, default_value_t = DEFAULT_SPLIT)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Artifact directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Operating domain as `<name>=<samples.csv>` or `<name>=<marginals.json>`.
    #[arg(long, value_parser = commands::parse_domain)]
    pub domain: Vec<(String, PathBuf)>,
    /// Loss map artifact; defaults to `<out>/loss_map.json`.
    #[arg(long)]
    pub loss_map: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scenario spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "loss")]
    pub loss_column: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Rank(args) => commands::rank(args),
        Command::SelectK(args) => commands::select_k(args),
        Command::Fit { data, k } => commands::fit(data, *k),
        Command::Predict(args) => commands::predict_domains(args),
        Command::Synth(args) => commands::synth(args),
        Command::Report { out } => report::report(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
