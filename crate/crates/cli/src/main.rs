//! `dirimult`: train, classify, plot and evaluate Dirichlet-multinomial
//! count classifiers.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 internal
//! invariant violation.

mod args;
mod commands;
mod error;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn run(cli: &Cli) -> error::Result<()> {
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Classify(a) => commands::classify(a),
        Command::Plot(a) => commands::plot(a),
        Command::Eval(a) => commands::eval(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
