use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;

use printsense::config::KvConfig;
use printsense::ingest::{encode_stream, pcm16_code, write_accel_csv, write_wav, Quantization};
use printsense::signal::{Axis, ChannelConfig};
use printsense::simulate::{render_scenario, ScenarioSpec};

use crate::error::{write_error, CliError};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Preset scenario name.
    #[arg(long, conflicts_with = "spec")]
    scenario: Option<String>,
    /// Scenario file (`key = value`); keys it omits come from its `name`
    /// preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Signal-to-noise ratio in dB; `inf` for none.
    #[arg(long)]
    snr: Option<f64>,
    /// Random seed; equal seeds give byte-identical output.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Also write both sensors as a protocol v1 stream to this path.
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Print the effective scenario and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(a: &SimulateArgs) -> Result<ScenarioSpec, CliError> {
    let mut spec = match (&a.scenario, &a.spec) {
        (_, Some(p)) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            ScenarioSpec::from_kv(&KvConfig::parse(&text)?)?
        }
        (Some(name), None) => ScenarioSpec::preset(name)?,
        (None, None) => ScenarioSpec::preset("normal-print")?,
    };
    if let Some(d) = a.duration {
        spec.duration_s = d;
    }
    if let Some(s) = a.snr {
        spec.snr_db = s;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| write_error(&path.display().to_string(), e))?;
    f(BufWriter::new(file)).map_err(|e| write_error(&path.display().to_string(), e))
}

pub fn run(a: SimulateArgs) -> Result<(), CliError> {
    let spec = resolve(&a)?;
    if a.print_config {
        print!("{spec}");
        return Ok(());
    }
    let dir = a.out.as_deref().expect("clap requires --out");
    fs::create_dir_all(dir).map_err(|e| write_error(&dir.display().to_string(), e))?;
    let rec = render_scenario(&spec)?;

    let acoustic = ChannelConfig::acoustic(spec.acoustic_hz)?;
    let wav = dir.join("acoustic.wav");
    write_wav(&wav, &acoustic, &rec.acoustic, Quantization::Clamp)
        .map_err(|e| CliError::write(&wav.display().to_string(), e))?;

    let accel_x = ChannelConfig::accelerometer(Axis::X, spec.accel_hz)?;
    let ts: Vec<i64> = (0..rec.accel[0].len() as u64).map(|i| accel_x.offset_us(i)).collect();
    write_file(&dir.join("accel.csv"), |w| {
        write_accel_csv(w, &ts, [&rec.accel[0], &rec.accel[1], &rec.accel[2]])
    })?;
    write_file(&dir.join("labels.jsonl"), |w| rec.write_labels(w))?;
    write_file(&dir.join("scenario.conf"), |mut w| {
        use std::io::Write;
        write!(w, "{spec}")?;
        w.flush()
    })?;

    if let Some(path) = &a.stream {
        // The stream carries the acoustic samples as stored in the WAV file,
        // so monitoring either source gives the same result.
        let quantized: Vec<f64> = rec
            .acoustic
            .iter()
            .map(|&x| pcm16_code(x) as f64 / 32768.0)
            .collect();
        write_file(path, |w| {
            encode_stream(
                w,
                Some((&accel_x, [&rec.accel[0], &rec.accel[1], &rec.accel[2]])),
                Some((&acoustic, &quantized)),
            )
        })?;
    }
    Ok(())
}
