use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use invctl::{load_config, run, Command, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    SolveFinite,
    SolveDiscounted,
    SolveAverage,
    Classify,
    VerifyStructure,
    PomdpSolve,
    PomdpSimulate,
    Simulate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::SolveFinite => Command::SolveFinite,
            Cmd::SolveDiscounted => Command::SolveDiscounted,
            Cmd::SolveAverage => Command::SolveAverage,
            Cmd::Classify => Command::Classify,
            Cmd::VerifyStructure => Command::VerifyStructure,
            Cmd::PomdpSolve => Command::PomdpSolve,
            Cmd::PomdpSimulate => Command::PomdpSimulate,
            Cmd::Simulate => Command::Simulate,
        }
    }
}

/// Inventory control dynamic programming on a grid.
#[derive(Debug, Parser)]
#[command(name = "invctl", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.config, cli.command.into(), cli.seed)
        .map_err(RunError::from)
        .and_then(|cfg| {
            let out = cli.out.clone().unwrap_or_else(|| cfg.output.clone());
            run(&cfg, &out)
        });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
