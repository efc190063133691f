//! Benchmark driver for the steady Navier-Stokes splitting solvers.
//!
//! Exit status: 0 on success, 1 for configuration or runtime errors, 2 when
//! a nonlinear solve did not converge.

mod commands;
mod config;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Experiment, RunArgs, RunConfig};

#[derive(Parser)]
#[command(version, about = "Steady Navier-Stokes splitting benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study.
    Mms(CommandArgs),
    /// Lid-driven cavity, optionally with Reynolds continuation.
    Cavity(CommandArgs),
    /// Cavity iteration counts across grad-div parameters.
    GammaSweep(CommandArgs),
    /// One problem solved by several methods.
    Compare(CommandArgs),
}

#[derive(clap::Args)]
struct CommandArgs {
    /// JSON file with default values; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

fn resolve(experiment: Experiment, args: CommandArgs) -> anyhow::Result<RunConfig> {
    let base = match &args.config {
        Some(path) => RunArgs::from_file(path)?,
        None => RunArgs::default(),
    };
    RunConfig::resolve(experiment, args.run.overlay(base))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (experiment, args) = match cli.command {
        Command::Mms(a) => (Experiment::Mms, a),
        Command::Cavity(a) => (Experiment::Cavity, a),
        Command::GammaSweep(a) => (Experiment::GammaSweep, a),
        Command::Compare(a) => (Experiment::Compare, a),
    };
    let config = match resolve(experiment, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let out = config.out.clone();
    match commands::run(config) {
        Ok(report) => {
            for m in &report.members {
                println!(
                    "{:<16} {:<7} iterations {:>4} {} ({:.2}s)",
                    m.label,
                    m.method,
                    m.iterations,
                    if m.converged { "converged" } else { "NOT CONVERGED" },
                    m.wall_time_s
                );
            }
            println!("wrote {}", out.display());
            if report.all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
