use std::io::{self, Write};

use super::Spectrogram;

/// Level mapped to black in graymap exports.
pub const DEFAULT_PGM_FLOOR_DB: f64 = -96.0;

/// Writes the spectrogram as CSV. The first row holds the bin frequencies in
/// Hz after a `time_s` corner cell; each following row starts with the frame
/// time in seconds. With `band` set, a trailing `band_ratio` column holds the
/// per-frame band energy ratio (empty for silent frames).
pub fn write_spectrogram_csv<W: Write>(
    sg: &Spectrogram,
    mut out: W,
    band: Option<(f64, f64)>,
) -> io::Result<()> {
    let mut header = String::from("time_s");
    for f in sg.bin_frequencies() {
        header.push(',');
        header.push_str(&f.to_string());
    }
    if band.is_some() {
        header.push_str(",band_ratio");
    }
    writeln!(out, "{header}")?;
    let ratios = band.map(|(lo, hi)| sg.band_energy_ratios(lo, hi));
    for (i, frame) in sg.frames.iter().enumerate() {
        let mut line = (sg.frame_times_us[i] as f64 / 1e6).to_string();
        for v in frame {
            line.push(',');
            line.push_str(&v.to_string());
        }
        if let Some(r) = &ratios {
            line.push(',');
            if let Ok(x) = &r[i] {
                line.push_str(&x.to_string());
            }
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// Binary graymap (P5): time runs left to right, frequency bottom to top,
/// `floor_db..0 dB` mapped linearly onto `0..255`.
pub fn write_spectrogram_pgm<W: Write>(sg: &Spectrogram, mut out: W, floor_db: f64) -> io::Result<()> {
    let (w, h) = (sg.num_frames(), sg.num_bins());
    write!(out, "P5\n{w} {h}\n255\n")?;
    let mut pixels = Vec::with_capacity(w * h);
    for bin in (0..h).rev() {
        for frame in &sg.frames {
            pixels.push(gray_level(frame[bin], floor_db));
        }
    }
    out.write_all(&pixels)?;
    out.flush()
}

fn gray_level(db: f64, floor_db: f64) -> u8 {
    let t = ((db - floor_db) / -floor_db).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}
