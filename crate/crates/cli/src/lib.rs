//! Subcommands of the `qwalk` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod parse;

use args::{Cli, Command};
use error::CliResult;

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Env(a) => commands::env::run(a).map(|_| 0),
        Command::Analytic(a) => commands::analytic::run(a).map(|_| 0),
        Command::Sim(a) => commands::sim::run(a).map(|_| 0),
        Command::Dist(a) => commands::dist::run(a).map(|_| 0),
        Command::Report(a) => commands::report::run(a),
    }
}
