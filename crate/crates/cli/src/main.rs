mod analyze;
mod error;
mod monitor;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use printsense::config::KvConfig;
use printsense::pipeline::MonitorConfig;

use error::CliError;

/// Printer-monitoring signal analysis: simulate, analyze and monitor.
#[derive(Parser, Debug)]
#[command(name = "printsense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every analysis command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `key = value` file layered over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a labelled scenario to acoustic.wav, accel.csv, labels.jsonl
    /// and scenario.conf.
    Simulate(simulate::SimulateArgs),
    /// Per-window features of a WAV or accelerometer CSV file.
    Features(analyze::FeaturesArgs),
    /// Spectrogram of a WAV file as CSV (and optionally a graymap).
    Spectrogram(analyze::SpectrogramArgs),
    /// Harmonic series of a WAV file.
    Harmonics(analyze::HarmonicsArgs),
    /// Run the full pipeline and emit condition events as JSON lines.
    Monitor(monitor::MonitorArgs),
    /// Regenerate the default state thresholds from the simulator.
    Calibrate(analyze::CalibrateArgs),
}

impl Common {
    fn file_kv(&self) -> Result<KvConfig, CliError> {
        match &self.config {
            None => Ok(KvConfig::new()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input(&p.display().to_string(), e))?;
                Ok(KvConfig::parse(&text)?)
            }
        }
    }

    /// Defaults, then the config file, then `flags`.
    pub fn monitor_config(&self, flags: &KvConfig) -> Result<MonitorConfig, CliError> {
        let mut kv = self.file_kv()?;
        kv.merge(flags);
        Ok(MonitorConfig::from_kv(&kv)?)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Features(a) => analyze::features(a),
        Command::Spectrogram(a) => analyze::spectrogram(a),
        Command::Harmonics(a) => analyze::harmonics(a),
        Command::Monitor(a) => monitor::run(a),
        Command::Calibrate(a) => analyze::calibrate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.broken_pipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("printsense: {e}");
            ExitCode::from(e.code)
        }
    }
}
