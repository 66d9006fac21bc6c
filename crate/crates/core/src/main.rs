use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ceramopt::cli::{run_command, Command};
use ceramopt::config::RunConfig;

/// Failure-probability shape optimization for 2D ceramic parts.
#[derive(Parser)]
#[command(name = "ceramopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Generate the configured mesh and write it as mesh.txt
    Mesh(CommonArgs),
    /// Solve the elasticity system; writes field.txt and stress.txt
    Solve(CommonArgs),
    /// Evaluate the failure intensity; adds objective.txt and survival.csv
    Objective(CommonArgs),
    /// Validate the shape gradient against finite differences (gradcheck.csv)
    Gradcheck(CommonArgs),
    /// Run the volume-constrained shape flow (trace.csv plus snapshots)
    Flow(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, ceramopt::config::ConfigError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        CliCommand::Mesh(a) => (Command::Mesh, a),
        CliCommand::Solve(a) => (Command::Solve, a),
        CliCommand::Objective(a) => (Command::Objective, a),
        CliCommand::Gradcheck(a) => (Command::Gradcheck, a),
        CliCommand::Flow(a) => (Command::Flow, a),
    };
    let config = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::FAILURE;
        }
    };
    match run_command(command, &config) {
        Ok(artifacts) => {
            for path in artifacts {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
