//! Operator commands: run the gateway, analyze recorded sessions, calibrate
//! a threshold and regenerate the fixture corpus.

pub mod analyze;
pub mod args;
pub mod calibrate;
pub mod config;
pub mod fixtures;
pub mod hex;
pub mod run;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config values or source syntax.
    #[error("{0}")]
    Usage(String),
    /// Missing files, busy ports, I/O failures.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match args::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "attnweb: {e}");
            e.exit_code()
        }
    }
}
