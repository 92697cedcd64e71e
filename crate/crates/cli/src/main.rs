//! `mirror-bounds`: run solvers, confidence intervals and Monte-Carlo
//! experiments from the command line.
//!
//! Usage errors (bad flags, malformed configuration) exit with status 2 and
//! runtime failures with status 1. Every file is written atomically.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// A failed command, classified for the exit status.
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Solve(a) => Ok(commands::solve(a)?),
        Command::Ci(a) => Ok(commands::ci(a)?),
        Command::Coverage(a) => commands::coverage(a),
        Command::Compare(a) => commands::compare(a),
        Command::EprmEval(a) => commands::eprm_eval(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
