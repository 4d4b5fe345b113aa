use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use clap::Args;

use printsense::classify::ConditionEvent;
use printsense::config::KvConfig;
use printsense::ingest::{read_accel_csv, read_wav, StreamDecoder, StreamFrame};
use printsense::pipeline::Monitor;

use crate::error::{ingest_error, write_error, CliError};
use crate::output::{finish, open_out, write_line};
use crate::Common;

#[derive(Args, Debug)]
pub struct MonitorArgs {
    /// Accelerometer source: a CSV file, a protocol stream file, or `-` for
    /// the stream on standard input.
    #[arg(long)]
    accel: Option<String>,
    /// Acoustic source: a WAV file, a protocol stream file, or `-`.
    #[arg(long)]
    audio: Option<String>,
    /// Event output; standard output when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn has_ext(src: &str, ext: &str) -> bool {
    Path::new(src)
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn is_stream(src: &str, file_ext: &str) -> bool {
    src == "-" || !has_ext(src, file_ext)
}

struct Sink {
    out: Box<dyn Write>,
}

impl Sink {
    fn emit(&mut self, events: Vec<ConditionEvent>) -> Result<(), CliError> {
        for e in events {
            write_line(&mut self.out, &e.to_json(), true)?;
        }
        Ok(())
    }
}

const CHUNK: usize = 64 * 1024;

/// Feeds one protocol source to the lanes it serves.
fn feed_stream(
    src: &str,
    acoustic: bool,
    accel: bool,
    monitor: &mut Monitor,
    sink: &mut Sink,
) -> Result<(), CliError> {
    let mut reader: Box<dyn Read> = if src == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(fs::File::open(src).map_err(|e| CliError::input(src, e))?)
    };
    let mut decoder = StreamDecoder::new();
    let mut buf = vec![0u8; CHUNK];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(CliError::input(src, e)),
        };
        let frames = decoder.push(&buf[..n]);
        route(&frames, acoustic, accel, monitor, sink)?;
    }
    let frames = decoder.finish();
    route(&frames, acoustic, accel, monitor, sink)?;
    if decoder.malformed_lines > 0 || decoder.time_regressions > 0 {
        eprintln!(
            "printsense: {src}: skipped {} malformed line(s), {} time regression(s)",
            decoder.malformed_lines, decoder.time_regressions
        );
    }
    Ok(())
}

fn route(
    frames: &[StreamFrame],
    acoustic: bool,
    accel: bool,
    monitor: &mut Monitor,
    sink: &mut Sink,
) -> Result<(), CliError> {
    let (mut a, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for f in frames {
        match *f {
            StreamFrame::Acoustic { t_us, sample } if acoustic => {
                monitor.start_acoustic(t_us)?;
                a.push(sample);
            }
            StreamFrame::Vibration { t_us, ax, ay, .. } if accel => {
                monitor.start_accel(t_us)?;
                x.push(ax);
                y.push(ay);
            }
            _ => {}
        }
    }
    if !a.is_empty() {
        sink.emit(monitor.push_acoustic(&a)?)?;
    }
    if !x.is_empty() {
        sink.emit(monitor.push_accel(&x, &y)?)?;
    }
    Ok(())
}

pub fn run(a: MonitorArgs) -> Result<(), CliError> {
    let mut cfg = a.common.monitor_config(&KvConfig::new())?;
    if a.common.print_config {
        let mut out = open_out(None)?;
        write!(out, "{}", cfg.to_kv()).map_err(|e| write_error("output", e))?;
        return finish(out);
    }
    if a.accel.is_none() && a.audio.is_none() {
        return Err(CliError::usage("monitor needs --accel and/or --audio"));
    }

    let audio_file = match &a.audio {
        Some(src) if !is_stream(src, "wav") => {
            let (ch, xs) = read_wav(Path::new(src)).map_err(|e| ingest_error(src, e))?;
            cfg.acoustic_rate_hz = ch.sample_rate_hz();
            Some(xs)
        }
        _ => None,
    };
    let accel_file = match &a.accel {
        Some(src) if !is_stream(src, "csv") => {
            let csv = read_accel_csv(Path::new(src)).map_err(|e| ingest_error(src, e))?;
            if csv.jitter_flagged() {
                eprintln!(
                    "printsense: warning: {src}: {} rows deviate >10% from the median sample interval",
                    csv.jittery_rows
                );
            }
            cfg.accel_rate_hz = csv.sample_rate_hz;
            Some(csv)
        }
        _ => None,
    };
    cfg.validate()?;

    let mut monitor = Monitor::new(cfg, a.audio.is_some(), a.accel.is_some())?;
    let mut sink = Sink {
        out: open_out(a.out.as_deref())?,
    };
    if let Some(xs) = audio_file {
        monitor.start_acoustic(0)?;
        sink.emit(monitor.push_acoustic(&xs)?)?;
    }
    if let Some(csv) = accel_file {
        monitor.start_accel(csv.start_time_us())?;
        sink.emit(monitor.push_accel(&csv.samples[0], &csv.samples[1])?)?;
    }

    let audio_stream = a.audio.as_deref().filter(|s| is_stream(s, "wav"));
    let accel_stream = a.accel.as_deref().filter(|s| is_stream(s, "csv"));
    match (audio_stream, accel_stream) {
        (Some(s), Some(t)) if s == t => feed_stream(s, true, true, &mut monitor, &mut sink)?,
        (s, t) => {
            if let Some(s) = s {
                feed_stream(s, true, false, &mut monitor, &mut sink)?;
            }
            if let Some(t) = t {
                feed_stream(t, false, true, &mut monitor, &mut sink)?;
            }
        }
    }
    let rest = monitor.finish();
    sink.emit(rest)?;
    finish(sink.out)
}
