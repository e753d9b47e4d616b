use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use infobid::experiments::{bounds, exp1, exp2, exp3, exp4, toy, Report};
use serde::de::DeserializeOwned;

/// Run the bidding and data-acquisition experiments.
#[derive(Parser)]
#[command(name = "infobid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy data selection under a sample budget.
    Exp1(Io),
    /// Budget pacing learning-rate and budget sweeps.
    Exp2(Io),
    /// Accuracy of label-free gradient proxies.
    Exp3(Io),
    /// End-to-end bidding campaigns and retraining.
    Exp4(Io),
    /// Try-accept hill climbing under reward noise.
    Toy(Io),
    /// Monte Carlo bound checks.
    Bounds(Io),
}

#[derive(Args)]
struct Io {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn execute<C, R>(io: &Io, run: impl FnOnce(&C) -> infobid::Result<R>) -> anyhow::Result<Vec<String>>
where
    C: DeserializeOwned + Default,
    R: Report,
{
    let cfg: C = load(io.config.as_deref())?;
    let result = run(&cfg)?;
    result.write(&io.out).with_context(|| format!("writing to {}", io.out.display()))?;
    println!("{}", serde_json::to_string_pretty(&result.summary())?);
    Ok(result.invariant_failures())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Exp1(io) => execute(io, exp1::run),
        Command::Exp2(io) => execute(io, exp2::run),
        Command::Exp3(io) => execute(io, exp3::run),
        Command::Exp4(io) => execute(io, exp4::run),
        Command::Toy(io) => execute(io, toy::run),
        Command::Bounds(io) => execute(io, bounds::run),
    };
    match outcome {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in failures {
                eprintln!("invariant failed: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
