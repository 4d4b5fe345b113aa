use std::fmt;
use std::io;

use printsense::classify::ClassifyError;
use printsense::config::ConfigError;
use printsense::ingest::IngestError;
use printsense::pipeline::PipelineError;
use printsense::signal::SignalError;
use printsense::simulate::SimError;

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    /// The reader of our output went away; exit quietly.
    pub broken_pipe: bool,
}

pub const USAGE: u8 = 2;
pub const WRITE: u8 = 3;
pub const INPUT: u8 = 4;
pub const EMPTY: u8 = 5;

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            broken_pipe: false,
        }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self::new(USAGE, message.to_string())
    }

    pub fn input(context: &str, e: impl fmt::Display) -> Self {
        Self::new(INPUT, format!("{context}: {e}"))
    }

    pub fn write(context: &str, e: impl fmt::Display) -> Self {
        Self::new(WRITE, format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::usage(format!("config: {e}"))
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::usage(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            other => Self::usage(other),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        Self::usage(e)
    }
}

/// Ingest failures: plain I/O while opening is still an input problem.
pub fn ingest_error(path: &str, e: IngestError) -> CliError {
    CliError::input(path, e)
}

pub fn write_error(path: &str, e: io::Error) -> CliError {
    let mut err = CliError::write(path, &e);
    err.broken_pipe = e.kind() == io::ErrorKind::BrokenPipe;
    err
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        Self::usage(e)
    }
}
