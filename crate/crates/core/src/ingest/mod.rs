//! File and stream formats: PCM16 WAV for the acoustic channel, CSV for the
//! accelerometer and a line-framed text protocol for live sources.

mod csv;
mod stream;
mod wav;

use thiserror::Error;

pub use self::csv::{read_accel_csv, read_accel_csv_from, write_accel_csv, AccelCsv, CSV_HEADER};
pub use self::stream::{decode_stream, encode_stream, StreamDecoder, StreamFrame};
pub use self::wav::{
    pcm16_code, read_wav, read_wav_from, write_wav, write_wav_to, Quantization,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("WAV data chunk declares {declared} bytes but only {available} are present")]
    TruncatedData { declared: usize, available: usize },
    #[error("sample {index} ({value}) is outside [-1, 1)")]
    OutOfRange { index: usize, value: f64 },
    #[error("bad CSV header `{0}`, expected `t_us,ax_g,ay_g,az_g`")]
    BadHeader(String),
    #[error("line {line}: timestamp does not increase")]
    NonMonotonicTime { line: usize },
    #[error("line {line}: {reason}")]
    UnparsableRow { line: usize, reason: String },
    #[error("{0}")]
    Signal(#[from] crate::signal::SignalError),
}
