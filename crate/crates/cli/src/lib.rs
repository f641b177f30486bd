//! The `annoteval` command line: corpus validation and statistics, model
//! annotation runs, evaluation reports and run comparison.
//!
//! Errors are printed as `ERROR\t<kind>\t<message>` on stderr. Exit codes:
//! 0 success, 1 invalid input data, 2 provider failure, 3 usage error.

pub mod args;
pub mod commands;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod render;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command, RunConfig};
pub use error::{CliError, Exit};
pub use pipeline::{evaluate, Evaluation};

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(a) => commands::validate(&a.input),
        Command::Stats(a) => commands::stats(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Compare(a) => commands::compare(a),
    }
}

/// Parses `args`, runs the command and reports errors. Returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Exit::Ok as i32;
        }
        Err(e) => {
            let _ = e.print();
            let text = e.to_string();
            let head = text
                .split("\n\n")
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let words: Vec<&str> = head.split_whitespace().collect();
            eprintln!("{}", CliError::usage(words.join(" ")).line());
            return Exit::Usage as i32;
        }
    };
    match run(cli) {
        Ok(()) => Exit::Ok as i32,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit as i32
        }
    }
}
