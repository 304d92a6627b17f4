//! Command-line front end: each subcommand reads sidecar files and snapshots,
//! calls into `ilc-core`, and writes CSV/JSON into an output directory.

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;
use thiserror::Error;

pub mod args;
mod commands;
mod output;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Empty(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Empty(_) => 3,
        }
    }

    pub(crate) fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    pub(crate) fn empty(e: impl std::fmt::Display) -> Self {
        CliError::Empty(e.to_string())
    }
}

pub(crate) fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.map_or(0, usize::from))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Ilc(a) => commands::ilc(&a),
        Command::Targetsdk(a) => commands::targetsdk(&a),
        Command::Longitudinal(a) => commands::longitudinal(&a),
        Command::Leakage(a) => commands::leakage(&a),
        Command::DumpDex(a) => commands::dump_dex(&a),
        Command::DumpManifest(a) => commands::dump_manifest(&a),
    })
}
