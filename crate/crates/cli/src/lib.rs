//! The `formdraft` command and its review server.

pub mod cli;
pub mod commands;
pub mod error;
pub mod server;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

pub use error::{CliError, CliResult};

/// Set to a stage name to abort the process right after that stage is saved.
pub const ENV_ABORT_AFTER: &str = "FORMDRAFT_ABORT_AFTER";
/// Bearer token for the review server when --token is not given.
pub const ENV_REVIEW_TOKEN: &str = "FORMDRAFT_REVIEW_TOKEN";

pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
