use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use pcw_cli::commands;
use pcw_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "pcw", version, about = "Pedestrian collision warning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (`key = value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Segmentation loss weight.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Scale divisor (1 = 512x256 input).
    #[arg(long, global = true)]
    scale: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic train and test splits.
    Generate,
    /// Train the network with the configured lambda.
    Train,
    /// Fit the HoG detector and score the test split.
    Baseline,
    /// Compare the baseline with the lambda = 0 and lambda > 0 networks.
    Eval,
    /// Run every stage and print the comparison.
    Repro,
}

fn run(cli: Cli) -> Result<()> {
    pcw_cli::configure_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(lambda) = cli.lambda {
        cfg.lambda = lambda;
    }
    if let Some(scale) = cli.scale {
        cfg.scale_divisor = scale as usize;
    }
    match cli.command {
        Command::Generate => {
            commands::generate(&cfg)?;
        }
        Command::Train => {
            let s = commands::train_model(&cfg, cfg.lambda)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Baseline => {
            let s = commands::baseline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Eval => print!("{}", commands::eval(&cfg)?.to_table()),
        Command::Repro => print!("{}", commands::repro(&cfg)?.to_table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
