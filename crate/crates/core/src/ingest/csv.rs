use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::signal::{Axis, ChannelConfig, ACCEL_RATE_HZ};

use super::IngestError;

pub const CSV_HEADER: &str = "t_us,ax_g,ay_g,az_g";

/// Parsed accelerometer CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelCsv {
    /// X, Y, Z channels at the inferred rate.
    pub channels: [ChannelConfig; 3],
    pub samples: [Vec<f64>; 3],
    pub timestamps_us: Vec<i64>,
    /// From the median timestamp delta; the 2 kHz default below two rows.
    pub sample_rate_hz: f64,
    /// Rows whose delta differs from the median by more than 10%.
    pub jittery_rows: usize,
}

impl AccelCsv {
    pub fn jitter_flagged(&self) -> bool {
        self.jittery_rows > 0
    }

    pub fn start_time_us(&self) -> i64 {
        self.timestamps_us.first().copied().unwrap_or(0)
    }
}

/// Writes `t_us,ax_g,ay_g,az_g` rows. Floats use the shortest text that
/// parses back to the same value.
pub fn write_accel_csv<W: Write>(
    out: W,
    timestamps_us: &[i64],
    axes: [&[f64]; 3],
) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for (i, t) in timestamps_us.iter().enumerate() {
        w.write_record([
            t.to_string(),
            axes[0][i].to_string(),
            axes[1][i].to_string(),
            axes[2][i].to_string(),
        ])?;
    }
    w.flush()
}

fn median(mut v: Vec<i64>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

fn unparsable(line: usize, reason: String) -> IngestError {
    IngestError::UnparsableRow { line, reason }
}

pub fn read_accel_csv_from(text: &str) -> Result<AccelCsv, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    // The reader's own line counter skips blank lines; count from the byte
    // offset instead.
    let bytes = text.as_bytes();
    let newlines: Vec<usize> = bytes
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (c == b'\n').then_some(i))
        .collect();
    let line_at = |pos: Option<&csv::Position>| {
        let Some(p) = pos else { return 0 };
        let mut b = p.byte() as usize;
        while b < bytes.len() && matches!(bytes[b], b'\r' | b'\n') {
            b += 1;
        }
        newlines.partition_point(|&i| i < b) + 1
    };
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h.iter().collect::<Vec<_>>().join(","),
        _ => String::new(),
    };
    if header.trim_start_matches('\u{feff}') != CSV_HEADER {
        return Err(IngestError::BadHeader(header));
    }
    let mut ts = Vec::new();
    let mut axes: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = line_at(e.position());
            unparsable(line, e.to_string())
        })?;
        let line = line_at(rec.position());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 4 {
            return Err(unparsable(line, format!("expected 4 fields, found {}", rec.len())));
        }
        let t: i64 = rec[0]
            .parse()
            .map_err(|_| unparsable(line, format!("bad timestamp `{}`", &rec[0])))?;
        if ts.last().is_some_and(|&prev| t <= prev) {
            return Err(IngestError::NonMonotonicTime { line });
        }
        for (k, f) in rec.iter().skip(1).enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| unparsable(line, format!("bad value `{f}`")))?;
            if !v.is_finite() {
                return Err(unparsable(line, format!("non-finite value `{f}`")));
            }
            axes[k].push(v);
        }
        ts.push(t);
    }
    let deltas: Vec<i64> = ts.windows(2).map(|p| p[1] - p[0]).collect();
    let (rate, jittery_rows) = if deltas.is_empty() {
        (ACCEL_RATE_HZ, 0)
    } else {
        let med = median(deltas.clone());
        let jitter = deltas
            .iter()
            .filter(|&&d| (d as f64 - med).abs() > 0.1 * med)
            .count();
        (1e6 / med, jitter)
    };
    let channels = [
        ChannelConfig::accelerometer(Axis::X, rate)?,
        ChannelConfig::accelerometer(Axis::Y, rate)?,
        ChannelConfig::accelerometer(Axis::Z, rate)?,
    ];
    Ok(AccelCsv {
        channels,
        samples: axes,
        timestamps_us: ts,
        sample_rate_hz: rate,
        jittery_rows,
    })
}

pub fn read_accel_csv(path: &Path) -> Result<AccelCsv, IngestError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| unparsable(0, format!("not UTF-8: {e}")))?;
    read_accel_csv_from(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(rows: &[&str]) -> String {
        let mut s = String::from(CSV_HEADER);
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    #[test]
    fn rate_from_one_second() {
        let mut out = Vec::new();
        let ts: Vec<i64> = (0..2000).map(|i| i * 500).collect();
        let zeros = vec![0.0; 2000];
        write_accel_csv(&mut out, &ts, [&zeros, &zeros, &zeros]).unwrap();
        let parsed = read_accel_csv_from(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(parsed.sample_rate_hz, 2000.0);
        assert!(!parsed.jitter_flagged());
        assert_eq!(parsed.channels[1].channel_id(), "accel_y");
    }

    #[test]
    fn duplicate_timestamp() {
        let text = csv(&["0,0,0,1", "500,0,0,1", "500,0,0,1"]);
        assert!(matches!(
            read_accel_csv_from(&text),
            Err(IngestError::NonMonotonicTime { line: 4 })
        ));
    }

    #[test]
    fn short_row() {
        let text = csv(&["0,0,0,1", "500,0,0"]);
        assert!(matches!(
            read_accel_csv_from(&text),
            Err(IngestError::UnparsableRow { line: 3, .. })
        ));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            read_accel_csv_from("time,x,y,z\n0,0,0,0\n"),
            Err(IngestError::BadHeader(_))
        ));
    }

    #[test]
    fn blank_lines_crlf_and_bom() {
        let text = "\u{feff}t_us,ax_g,ay_g,az_g\r\n0,1,2,3\r\n\r\n500, 4 ,5,6\r\n";
        let p = read_accel_csv_from(text).unwrap();
        assert_eq!(p.samples[0], vec![1.0, 4.0]);
        let bad = "t_us,ax_g,ay_g,az_g\n0,1,2,3\n\n500,x,5,6\n";
        assert!(matches!(
            read_accel_csv_from(bad),
            Err(IngestError::UnparsableRow { line: 4, .. })
        ));
    }

    #[test]
    fn jitter_flagged() {
        let text = csv(&["0,0,0,1", "500,0,0,1", "1000,0,0,1", "1700,0,0,1", "2200,0,0,1"]);
        let p = read_accel_csv_from(&text).unwrap();
        assert_eq!(p.sample_rate_hz, 2000.0);
        assert_eq!(p.jittery_rows, 1);
    }

    #[test]
    fn full_precision_round_trip() {
        let xs = [0.1, 1.0 / 3.0, -2.2250738585072014e-308, 1e300];
        let ts = [0, 500, 1000, 1500];
        let mut out = Vec::new();
        write_accel_csv(&mut out, &ts, [&xs, &xs, &xs]).unwrap();
        let p = read_accel_csv_from(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(p.samples[0], xs.to_vec());
        assert_eq!(p.timestamps_us, ts.to_vec());
    }
}
