//! The `graphvar` command-line tool.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;

/// Overrides the default distillation-target cache directory.
pub const CACHE_ENV: &str = "GRAPHVAR_CACHE_DIR";

/// Parses `args` (program name first) and runs the command; returns the exit
/// code: 0 on success, 1 on usage errors, 2 on runtime or numerical errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let argv = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::run(cli.command, argv) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
