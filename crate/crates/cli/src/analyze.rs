use std::path::{Path, PathBuf};

use clap::Args;

use printsense::calibrate::{calibrate_thresholds, render_threshold_file, CalibrationPlan};
use printsense::config::KvConfig;
use printsense::features::extract_features;
use printsense::ingest::{read_accel_csv, read_wav};
use printsense::jsonl;
use printsense::pipeline::MonitorConfig;
use printsense::signal::{ChannelConfig, SignalWindow, Windower};
use printsense::spectral::{
    analyze_harmonics, spectrogram as compute_spectrogram, write_spectrogram_csv,
    write_spectrogram_pgm, SpectralError, Taper, DEFAULT_PGM_FLOOR_DB,
};

use crate::error::{ingest_error, write_error, CliError, EMPTY};
use crate::output::{finish, open_out, write_line};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq)]
enum InputKind {
    Wav,
    Csv,
}

fn input_kind(path: &Path) -> Result<InputKind, CliError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
        Some(e) if e == "wav" => Ok(InputKind::Wav),
        Some(e) if e == "csv" => Ok(InputKind::Csv),
        _ => Err(CliError::usage(format!(
            "{}: expected a .wav or .csv file",
            path.display()
        ))),
    }
}

fn load_wav(path: &Path) -> Result<(ChannelConfig, Vec<f64>), CliError> {
    read_wav(path).map_err(|e| ingest_error(&path.display().to_string(), e))
}

fn print_config(cfg: &MonitorConfig) -> Result<(), CliError> {
    let mut out = open_out(None)?;
    write!(out, "{}", cfg.to_kv()).map_err(|e| write_error("output", e))?;
    finish(out)
}

use std::io::Write;

fn window_flags(prefix: &str, window: Option<usize>, hop: Option<usize>) -> KvConfig {
    let mut kv = KvConfig::new();
    if let Some(n) = window {
        kv.set(&format!("window.{prefix}.len"), n);
    }
    if let Some(h) = hop {
        kv.set(&format!("window.{prefix}.hop"), h);
    }
    kv
}

fn windows(ch: ChannelConfig, samples: &[f64], (len, hop): (usize, usize), start_us: i64) -> Result<Vec<SignalWindow>, CliError> {
    let mut w = Windower::new(ch, len, hop, start_us)?;
    Ok(w.push_and_emit(samples))
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// WAV (acoustic) or CSV (accelerometer) input.
    #[arg(long = "in")]
    input: PathBuf,
    /// Window length in samples.
    #[arg(long)]
    window: Option<usize>,
    /// Hop between window starts in samples.
    #[arg(long)]
    hop: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

/// Features of the raw samples (no band-pass), one line per window and
/// channel.
pub fn features(a: FeaturesArgs) -> Result<(), CliError> {
    let kind = input_kind(&a.input)?;
    let prefix = if kind == InputKind::Wav { "acoustic" } else { "accel" };
    let cfg = a.common.monitor_config(&window_flags(prefix, a.window, a.hop))?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let per_channel: Vec<Vec<SignalWindow>> = match kind {
        InputKind::Wav => {
            let (ch, xs) = load_wav(&a.input)?;
            vec![windows(ch, &xs, cfg.acoustic_window, 0)?]
        }
        InputKind::Csv => {
            let csv = read_accel_csv(&a.input)
                .map_err(|e| ingest_error(&a.input.display().to_string(), e))?;
            if csv.jitter_flagged() {
                eprintln!(
                    "printsense: warning: {} rows deviate >10% from the median sample interval",
                    csv.jittery_rows
                );
            }
            let t0 = csv.start_time_us();
            let mut out = Vec::new();
            for (ch, xs) in csv.channels.iter().zip(&csv.samples) {
                out.push(windows(ch.clone(), xs, cfg.accel_window, t0)?);
            }
            out
        }
    };
    let mut out = open_out(a.out.as_deref())?;
    let n = per_channel[0].len();
    for k in 0..n {
        for ch in &per_channel {
            write_line(&mut out, &jsonl::feature_vector(&extract_features(&ch[k])), false)?;
        }
    }
    finish(out)
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((p(lo)?, p(hi)?))
}

#[derive(Args, Debug)]
pub struct SpectrogramArgs {
    /// WAV input.
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an 8-bit graymap (PGM) here.
    #[arg(long)]
    pgm: Option<PathBuf>,
    /// Append a per-frame band energy ratio column for `LO,HI` Hz.
    #[arg(long, value_parser = parse_band)]
    band: Option<(f64, f64)>,
    /// Frame length in samples.
    #[arg(long)]
    window: Option<usize>,
    /// Hop between window starts in samples.
    #[arg(long)]
    hop: Option<usize>,
    #[command(flatten)]
    common: Common,
}

pub fn spectrogram(a: SpectrogramArgs) -> Result<(), CliError> {
    let cfg = a.common.monitor_config(&window_flags("acoustic", a.window, a.hop))?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let (ch, xs) = load_wav(&a.input)?;
    if let Some((lo, hi)) = a.band {
        if !(lo >= 0.0 && lo < hi && hi <= ch.nyquist_hz()) {
            return Err(CliError::usage(format!(
                "--band {lo},{hi}: need 0 <= lo < hi <= {} Hz",
                ch.nyquist_hz()
            )));
        }
    }
    let frames = windows(ch, &xs, cfg.acoustic_window, 0)?;
    let sg = match compute_spectrogram(&frames, Taper::Hann) {
        Ok(sg) => sg,
        Err(SpectralError::NoWindows) => {
            return Err(CliError::new(EMPTY, "input shorter than one frame"))
        }
        Err(e) => return Err(CliError::input(&a.input.display().to_string(), e)),
    };
    let mut out = open_out(a.out.as_deref())?;
    write_spectrogram_csv(&sg, &mut out, a.band).map_err(|e| write_error("csv", e))?;
    finish(out)?;
    if let Some(p) = &a.pgm {
        let out = open_out(Some(p))?;
        write_spectrogram_pgm(&sg, out, DEFAULT_PGM_FLOOR_DB)
            .map_err(|e| write_error(&p.display().to_string(), e))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct HarmonicsArgs {
    /// WAV input.
    #[arg(long = "in")]
    input: PathBuf,
    /// Highest harmonic order searched.
    #[arg(long)]
    max_order: Option<u32>,
    #[command(flatten)]
    common: Common,
}

pub fn harmonics(a: HarmonicsArgs) -> Result<(), CliError> {
    let mut flags = KvConfig::new();
    if let Some(k) = a.max_order {
        flags.set("harmonics.max_order", k);
    }
    let cfg = a.common.monitor_config(&flags)?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let (ch, xs) = load_wav(&a.input)?;
    match analyze_harmonics(&xs, &ch, &cfg.harmonics) {
        Ok((report, _)) => {
            let mut out = open_out(None)?;
            write_line(&mut out, &jsonl::harmonic_report(&report), true)?;
            finish(out)
        }
        Err(e @ (SpectralError::NoSeries | SpectralError::NoPeaks | SpectralError::NoWindows)) => {
            Err(CliError::new(EMPTY, e.to_string()))
        }
        Err(e) => Err(CliError::input(&a.input.display().to_string(), e)),
    }
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Threshold file to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fence half-width in interquartile ranges.
    #[arg(long)]
    fence: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let cfg = a.common.monitor_config(&KvConfig::new())?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let mut plan = CalibrationPlan::default();
    if let Some(f) = a.fence {
        if !(f.is_finite() && f >= 0.0) {
            return Err(CliError::usage("--fence must be a non-negative number"));
        }
        plan.fence = f;
    }
    let th = calibrate_thresholds(&plan, &cfg).map_err(CliError::usage)?;
    let mut out = open_out(a.out.as_deref())?;
    write!(out, "{}", render_threshold_file(&th, &plan)).map_err(|e| write_error("output", e))?;
    finish(out)
}
