use std::fs;
use std::io::{self, Cursor, Write};
use std::path::Path;

use crate::signal::ChannelConfig;

use super::IngestError;

/// What `write_wav` does with samples outside `[-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quantization {
    #[default]
    Clamp,
    /// Fail with `OutOfRange` instead of clamping.
    Strict,
}

/// PCM16 code of a sample: `round(x * 32768)` with halves away from zero,
/// clamped to `[-32768, 32767]`.
pub fn pcm16_code(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn spec(sample_rate_hz: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn hound_io(e: hound::Error) -> IngestError {
    match e {
        hound::Error::IoError(e) => IngestError::Io(e),
        other => IngestError::Io(io::Error::other(other)),
    }
}

/// Writes a canonical 44-byte-header PCM16 mono WAV.
pub fn write_wav_to<W: Write>(
    mut out: W,
    sample_rate_hz: u32,
    samples: &[f64],
    mode: Quantization,
) -> Result<(), IngestError> {
    if mode == Quantization::Strict {
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, x)| !(-1.0..1.0).contains(*x))
        {
            return Err(IngestError::OutOfRange { index, value });
        }
    }
    let mut buf = Cursor::new(Vec::with_capacity(44 + samples.len() * 2));
    let mut w = hound::WavWriter::new(&mut buf, spec(sample_rate_hz)).map_err(hound_io)?;
    let mut pcm = w.get_i16_writer(samples.len() as u32);
    for &x in samples {
        pcm.write_sample(pcm16_code(x));
    }
    pcm.flush().map_err(hound_io)?;
    w.finalize().map_err(hound_io)?;
    out.write_all(buf.get_ref())?;
    out.flush()?;
    Ok(())
}

pub fn write_wav(
    path: &Path,
    config: &ChannelConfig,
    samples: &[f64],
    mode: Quantization,
) -> Result<(), IngestError> {
    let file = io::BufWriter::new(fs::File::create(path)?);
    write_wav_to(file, config.sample_rate_hz().round() as u32, samples, mode)
}

/// Parses a PCM16 mono WAV held in memory. Chunks other than `fmt ` and
/// `data` are skipped.
pub fn read_wav_from(bytes: &[u8]) -> Result<(ChannelConfig, Vec<f64>), IngestError> {
    // Reading from memory, so an I/O error here means the header ran out.
    let mut r = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| match e {
        hound::Error::Unsupported => IngestError::UnsupportedFormat(e.to_string()),
        other => IngestError::MalformedHeader(other.to_string()),
    })?;
    let s = r.spec();
    if s.sample_format != hound::SampleFormat::Int || s.channels != 1 || s.bits_per_sample != 16 {
        return Err(IngestError::UnsupportedFormat(format!(
            "{:?} {} channel(s), {} bits; need PCM16 mono",
            s.sample_format, s.channels, s.bits_per_sample
        )));
    }
    let declared = r.len() as usize * 2;
    let mut samples = Vec::with_capacity(r.len() as usize);
    for x in r.samples::<i16>() {
        match x {
            Ok(code) => samples.push(code as f64 / 32768.0),
            Err(hound::Error::IoError(_)) => {
                return Err(IngestError::TruncatedData {
                    declared,
                    available: samples.len() * 2,
                })
            }
            Err(e) => return Err(IngestError::MalformedHeader(e.to_string())),
        }
    }
    let channel = ChannelConfig::acoustic(s.sample_rate as f64)?;
    Ok((channel, samples))
}

pub fn read_wav(path: &Path) -> Result<(ChannelConfig, Vec<f64>), IngestError> {
    read_wav_from(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(rate: u32, xs: &[f64]) -> Vec<u8> {
        let mut v = Vec::new();
        write_wav_to(&mut v, rate, xs, Quantization::Clamp).unwrap();
        v
    }

    #[test]
    fn codes_at_the_edges() {
        assert_eq!(pcm16_code(0.0), 0);
        assert_eq!(pcm16_code(1.0 - 1.0 / 32768.0), 32767);
        assert_eq!(pcm16_code(-1.0), -32768);
        assert_eq!(pcm16_code(1.0), 32767);
        assert_eq!(pcm16_code(-3.0), -32768);
        // Halves round away from zero.
        assert_eq!(pcm16_code(0.5 / 32768.0), 1);
        assert_eq!(pcm16_code(-0.5 / 32768.0), -1);
    }

    fn u32_at(b: &[u8], i: usize) -> u32 {
        u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
    }

    #[test]
    fn header_is_canonical() {
        let b = encode(5000, &[0.0, 0.5]);
        assert_eq!(b.len(), 48);
        assert_eq!(&b[0..4], b"RIFF");
        assert_eq!(u32_at(&b, 4), 40);
        assert_eq!(u32_at(&b, 24), 5000);
        assert_eq!(u32_at(&b, 28), 10000);
        assert_eq!(u32_at(&b, 40), 4);
    }

    #[test]
    fn sine_round_trip() {
        let xs: Vec<f64> = (0..5000)
            .map(|i| {
                let x = 0.9 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 5000.0).sin();
                pcm16_code(x) as f64 / 32768.0
            })
            .collect();
        let (ch, back) = read_wav_from(&encode(5000, &xs)).unwrap();
        assert_eq!(ch.sample_rate_hz(), 5000.0);
        assert_eq!(back, xs);
    }

    #[test]
    fn stereo_rejected() {
        let mut b = Cursor::new(Vec::new());
        let stereo = hound::WavSpec { channels: 2, ..spec(5000) };
        let mut w = hound::WavWriter::new(&mut b, stereo).unwrap();
        for _ in 0..4 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let b = b.into_inner();
        assert!(matches!(read_wav_from(&b), Err(IngestError::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated_data_detected() {
        let mut b = encode(5000, &[0.1; 10]);
        b.truncate(b.len() - 4);
        assert!(matches!(
            read_wav_from(&b),
            Err(IngestError::TruncatedData {
                declared: 20,
                available: 16
            })
        ));
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(
            read_wav_from(b"not a wav file at all"),
            Err(IngestError::MalformedHeader(_))
        ));
    }

    #[test]
    fn strict_mode_rejects_full_scale() {
        let mut v = Vec::new();
        assert!(matches!(
            write_wav_to(&mut v, 5000, &[0.0, 1.0], Quantization::Strict),
            Err(IngestError::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let b = encode(5000, &[0.25, -0.25]);
        let mut with_list = b[..12].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&4u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&b[12..]);
        let (_, xs) = read_wav_from(&with_list).unwrap();
        assert_eq!(xs, vec![0.25, -0.25]);
    }
}
