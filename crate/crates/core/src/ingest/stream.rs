//! Line protocol v1.
//!
//! ```text
//! V,<t_us>,<ax_g>,<ay_g>,<az_g>
//! A,<t_us>,<sample>
//! ```
//!
//! One record per `\n`-terminated line (a trailing `\r` is ignored). Blank
//! lines and lines starting with `#` are skipped silently. Anything else that
//! does not parse, or carries a non-finite value, is counted in
//! `malformed_lines` and dropped. A timestamp lower than the previous one of
//! the same tag is counted in `time_regressions` and dropped.

use std::io::{self, Write};

use crate::signal::ChannelConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StreamFrame {
    Vibration { t_us: i64, ax: f64, ay: f64, az: f64 },
    Acoustic { t_us: i64, sample: f64 },
}

/// Incremental decoder; output does not depend on how bytes are chunked.
#[derive(Debug, Default, Clone)]
pub struct StreamDecoder {
    partial: Vec<u8>,
    pub malformed_lines: u64,
    pub time_regressions: u64,
    last_v: Option<i64>,
    last_a: Option<i64>,
}

fn parse_line(line: &str) -> Option<StreamFrame> {
    let fields: Vec<&str> = line.split(',').collect();
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let t = || fields.get(1)?.trim().parse::<i64>().ok();
    match (fields[0].trim(), fields.len()) {
        ("V", 5) => Some(StreamFrame::Vibration {
            t_us: t()?,
            ax: num(fields[2])?,
            ay: num(fields[3])?,
            az: num(fields[4])?,
        }),
        ("A", 3) => Some(StreamFrame::Acoustic {
            t_us: t()?,
            sample: num(fields[2])?,
        }),
        _ => None,
    }
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes every complete line in `bytes`, keeping a trailing partial
    /// line for the next call.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<StreamFrame> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'\n' {
                self.partial.extend_from_slice(&bytes[start..i]);
                let line = std::mem::take(&mut self.partial);
                self.handle(&line, &mut out);
                start = i + 1;
            }
        }
        self.partial.extend_from_slice(&bytes[start..]);
        out
    }

    /// Decodes an unterminated final line, if any.
    pub fn finish(&mut self) -> Vec<StreamFrame> {
        let mut out = Vec::new();
        if !self.partial.is_empty() {
            let line = std::mem::take(&mut self.partial);
            self.handle(&line, &mut out);
        }
        out
    }

    fn handle(&mut self, raw: &[u8], out: &mut Vec<StreamFrame>) {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let Ok(line) = std::str::from_utf8(raw) else {
            self.malformed_lines += 1;
            return;
        };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return;
        }
        let Some(frame) = parse_line(line) else {
            self.malformed_lines += 1;
            return;
        };
        let (t, last) = match frame {
            StreamFrame::Vibration { t_us, .. } => (t_us, &mut self.last_v),
            StreamFrame::Acoustic { t_us, .. } => (t_us, &mut self.last_a),
        };
        if last.is_some_and(|prev| t < prev) {
            self.time_regressions += 1;
            return;
        }
        *last = Some(t);
        out.push(frame);
    }
}

/// Decodes a sequence of chunks in one go. Returns the frames and the
/// `(malformed_lines, time_regressions)` counters.
pub fn decode_stream<'a>(
    chunks: impl IntoIterator<Item = &'a [u8]>,
) -> (Vec<StreamFrame>, (u64, u64)) {
    let mut d = StreamDecoder::new();
    let mut frames = Vec::new();
    for c in chunks {
        frames.extend(d.push(c));
    }
    frames.extend(d.finish());
    (frames, (d.malformed_lines, d.time_regressions))
}

/// Writes a recording as protocol lines, merged in time order (vibration
/// first on equal timestamps).
pub fn encode_stream<W: Write>(
    mut out: W,
    accel: Option<(&ChannelConfig, [&[f64]; 3])>,
    acoustic: Option<(&ChannelConfig, &[f64])>,
) -> io::Result<()> {
    writeln!(out, "# printsense stream v1")?;
    let (mut i, mut j) = (0usize, 0usize);
    let n_v = accel.map_or(0, |(_, a)| a[0].len());
    let n_a = acoustic.map_or(0, |(_, s)| s.len());
    while i < n_v || j < n_a {
        let tv = accel.filter(|_| i < n_v).map(|(c, _)| c.offset_us(i as u64));
        let ta = acoustic.filter(|_| j < n_a).map(|(c, _)| c.offset_us(j as u64));
        match (tv, ta) {
            (Some(t), other) if other.map_or(true, |ta| t <= ta) => {
                let a = accel.unwrap().1;
                writeln!(out, "V,{t},{},{},{}", a[0][i], a[1][i], a[2][i])?;
                i += 1;
            }
            (_, Some(t)) => {
                writeln!(out, "A,{t},{}", acoustic.unwrap().1[j])?;
                j += 1;
            }
            _ => unreachable!(),
        }
    }
    out.flush()
}
