//! `algebroid`: validate, simulate and compare contact systems on Lie algebroids.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 integration failure, 4 regularity failure.

mod args;
mod commands;
mod failure;
mod session;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::Failure;

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate(run) => commands::validate(run.resolve()?),
        Command::Simulate { run, sweep } => commands::simulate(run.resolve()?, sweep.as_deref()),
        Command::Compare(run) => commands::compare(run.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
