//! Command-line harness around `specgrad-core`: approximation error tables,
//! gradient bounds, finite-difference checks, condition-number surveys and
//! toy hybrid training, with CSV/JSON outputs and a binary feature format.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod gcpf;
pub mod numfmt;
pub mod table;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

/// Runs the command line `args` (program name first) and returns the exit
/// code. Errors are reported on `stderr`.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match config::merge_config_file(args) {
        Ok(a) => a,
        Err(e) => return report(e, stderr),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::ApproxTable(a) => commands::approx::run(a, stdout),
        Command::Bounds(a) => commands::bounds::run(a, stdout),
        Command::Gradcheck(a) => commands::gradcheck::run(a, stdout),
        Command::Condition(a) => commands::condition::run(a, stdout),
        Command::TrainToy(a) => commands::train::run(a, stdout),
        Command::GenFeatures(a) => commands::gen::run(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => report(e, stderr),
    }
}

fn report(e: CliError, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "specgrad: {e}");
    e.exit_code()
}
