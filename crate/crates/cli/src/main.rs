//! `deconfound` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EvaluateArgs, ExperimentArgs, OnionFitArgs, OnionTransformArgs, SimulateArgs, TrainArgs};

#[derive(Debug, Parser)]
#[command(name = "deconfound", version, about = "Confounder removal toolkit: ONION, DANN and evaluation harness")]
pub struct Cli {
    /// Directory for all outputs.
    #[arg(long, global = true, env = "DECONFOUND_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// Random seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a confounded train/test pair from the factor model.
    Simulate(SimulateArgs),
    /// Fit an ONION basis on training data and its confounders.
    OnionFit(OnionFitArgs),
    /// Remove the confounder directions of a basis from a matrix.
    OnionTransform(OnionTransformArgs),
    /// Train a classifier pipeline.
    Train(TrainArgs),
    /// Score a trained pipeline on labelled data.
    Evaluate(EvaluateArgs),
    /// Run a multi-method experiment from a JSON config.
    Experiment(ExperimentArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}
