//! `smoothcert`: train, certify, sweep and plot randomized-smoothing
//! experiments on small tabular datasets.
//!
//! Every command writes a `manifest.json` into its output directory and
//! prints a JSON summary on stdout. Exit codes: 2 bad configuration,
//! 3 unreadable data or model, 4 training divergence, 5 unreachable sweep
//! target.

mod commands;
mod error;
mod layered;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::certify::CertifyArgs;
use commands::gen_data::GenDataArgs;
use commands::plot::PlotArgs;
use commands::sweep::SweepArgs;
use commands::train::TrainArgs;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "smoothcert", version, about = "Randomized-smoothing certification against ℓ1 and ℓ2 perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Train an MLP base classifier with noise augmentation.
    Train(TrainArgs),
    /// Certify every row of a dataset with a trained model.
    Certify(CertifyArgs),
    /// Compare schemes at matched clean accuracy.
    Sweep(SweepArgs),
    /// Plot certified accuracy against radius.
    Plot(PlotArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
    /// Write synthetic train/test CSVs.
    GenData(GenDataArgs),
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// `manifest.json` or the directory holding it.
    manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn dispatch(cmd: Cmd) -> CliResult<commands::Outcome> {
    match cmd {
        Cmd::Train(a) => commands::run(&a.resolve()?),
        Cmd::Certify(a) => commands::run(&a.resolve()?),
        Cmd::Sweep(a) => commands::run(&a.resolve()?),
        Cmd::Plot(a) => commands::run(&a.resolve()?),
        Cmd::GenData(a) => commands::run(&a.resolve()?),
        Cmd::Replay(a) => commands::replay(&a.manifest, a.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
            match outcome.failure {
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.code)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
