mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use config::{Cli, Command, FileConfig, Format};
use output::Outputs;

pub const THREADS_ENV: &str = "CLOCKSTAT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(mode) = &file.mode {
        if mode != cli.command.mode() {
            return Err(CliError::Usage(format!(
                "config mode `{mode}` does not match subcommand `{}`",
                cli.command.mode()
            )));
        }
    }
    let dir = cli
        .output
        .clone()
        .or_else(|| file.output.as_ref().map(|p| file.base_dir.join(p)))
        .unwrap_or_else(|| PathBuf::from("."));
    let format = config::pick(cli.format, file.format, Format::Csv);
    let out = Outputs::new(&dir, output::command_line())?;
    match &cli.command {
        Command::Theta(a) => commands::theta(a, &file, format, &out),
        Command::Cumulants(a) => commands::cumulants(a, &file, format, &out),
        Command::Sweep(a) => commands::sweep(a, &file, &out),
        Command::Trajectories(a) => commands::trajectories(a, &file, &out),
        Command::Wtd(a) => commands::wtd(a, &file, &out),
        Command::Crosscheck(a) => commands::crosscheck(a, &file, format, &out),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed flags
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("clockstat: usage error: {msg}");
            eprintln!("Run `clockstat --help` for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("clockstat: error: {msg}");
            ExitCode::from(1)
        }
    }
}
