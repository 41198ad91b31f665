//! Command-line front end for the `rotkey` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;
pub mod range;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use crate::args::{Cli, Command, Merge};
use crate::config::FileConfig;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "ROTKEY_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid flags or inputs, detected before any computation (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Computation or I/O failure (exit 1).
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<range::ParseError> for CliError {
    fn from(e: range::ParseError) -> Self {
        CliError::Usage(e.0)
    }
}

/// Size the global thread pool from [`THREADS_ENV`], if set.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(value) = value else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // A pool that is already running (e.g. in tests) is kept as is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args` (including the program name), run the command and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let shown: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, &shown, stdout) {
        Ok(success) => i32::from(!success),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, shown: &[String], stdout: &mut dyn Write) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let format = cli.format.or(file.format);
    let output = cli.output.clone().or(file.output.clone());
    let outcome = match cli.command {
        Command::Verify(a) => commands::verify(a.merge(file.verify))?,
        Command::Rate(a) => commands::rate(a.merge(file.rate))?,
        Command::Asymptotic(a) => commands::asymptotic(a.merge(file.asymptotic))?,
        Command::Scan(a) => commands::scan(a.merge(file.scan))?,
        Command::Threshold(a) => commands::threshold(a.merge(file.threshold))?,
        Command::Simulate(a) => commands::simulate(a.merge(file.simulate))?,
    };
    match output {
        Some(path) => {
            let mut f = std::io::BufWriter::new(
                std::fs::File::create(&path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?,
            );
            output::write_outcome(&mut f, &outcome, format, shown)?;
            f.flush()?;
        }
        None => output::write_outcome(stdout, &outcome, format, shown)?,
    }
    Ok(outcome.success)
}
