//! Channels, sample windows and the streaming windower.
//!
//! Everything downstream operates on [`SignalWindow`]s: a contiguous run of
//! one channel's samples tagged with the channel configuration and the
//! timestamp of its first sample. The [`Windower`] cuts an arbitrarily
//! chunked sample stream into fixed-length, optionally overlapping windows.

use std::fmt;

use thiserror::Error;

/// Default accelerometer sample rate (Hz).
pub const ACCEL_RATE_HZ: f64 = 2000.0;
/// Default acoustic sample rate (Hz).
pub const ACOUSTIC_RATE_HZ: f64 = 5000.0;

/// Default accelerometer window: 1024 samples, hop 512 (0.512 s at 2 kHz).
pub const ACCEL_WINDOW: (usize, usize) = (1024, 512);
/// Default acoustic window: 2048 samples, hop 1024 (0.4096 s at 5 kHz).
pub const ACOUSTIC_WINDOW: (usize, usize) = (2048, 1024);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("window needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("sample rate {rate_hz} Hz cannot represent content up to {f_max_hz} Hz")]
    NyquistViolation { rate_hz: f64, f_max_hz: f64 },
    #[error("invalid windowing: window_len={window_len}, hop_len={hop_len}")]
    InvalidWindowing { window_len: usize, hop_len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Accelerometer(Axis),
    Acoustic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Units {
    /// Standard gravity.
    G,
    /// Full scale mapped to [-1, 1].
    NormalizedPressure,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::G => "g",
            Units::NormalizedPressure => "normalized_pressure",
        })
    }
}

/// Static description of one sensor channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    channel_id: String,
    kind: ChannelKind,
    sample_rate_hz: f64,
    units: Units,
}

impl ChannelConfig {
    pub fn new(
        channel_id: impl Into<String>,
        kind: ChannelKind,
        sample_rate_hz: f64,
        units: Units,
    ) -> Result<Self, SignalError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidSampleRate(sample_rate_hz));
        }
        Ok(Self {
            channel_id: channel_id.into(),
            kind,
            sample_rate_hz,
            units,
        })
    }

    /// Accelerometer axis channel named `accel_<axis>`, in g.
    pub fn accelerometer(axis: Axis, sample_rate_hz: f64) -> Result<Self, SignalError> {
        Self::new(
            format!("accel_{}", axis.as_str()),
            ChannelKind::Accelerometer(axis),
            sample_rate_hz,
            Units::G,
        )
    }

    /// Acoustic channel named `acoustic`, normalized to full scale.
    pub fn acoustic(sample_rate_hz: f64) -> Result<Self, SignalError> {
        Self::new(
            "acoustic",
            ChannelKind::Acoustic,
            sample_rate_hz,
            Units::NormalizedPressure,
        )
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    /// Rejects analyses that need content above the Nyquist frequency.
    pub fn check_nyquist(&self, f_max_hz: f64) -> Result<(), SignalError> {
        if self.sample_rate_hz >= 2.0 * f_max_hz {
            Ok(())
        } else {
            Err(SignalError::NyquistViolation {
                rate_hz: self.sample_rate_hz,
                f_max_hz,
            })
        }
    }

    /// Offset in microseconds of sample `index` from the stream start.
    pub fn offset_us(&self, index: u64) -> i64 {
        (index as f64 * 1e6 / self.sample_rate_hz).round() as i64
    }
}

/// A validated, immutable run of at least two finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    channel: ChannelConfig,
    start_time_us: i64,
    samples: Vec<f64>,
}

/// Builds a window, rejecting fewer than two samples or any NaN/Inf.
pub fn make_window(
    channel: ChannelConfig,
    start_time_us: i64,
    samples: Vec<f64>,
) -> Result<SignalWindow, SignalError> {
    if samples.len() < 2 {
        return Err(SignalError::TooShort(samples.len()));
    }
    if let Some(idx) = samples.iter().position(|x| !x.is_finite()) {
        return Err(SignalError::NonFiniteSample(idx));
    }
    Ok(SignalWindow {
        channel,
        start_time_us,
        samples,
    })
}

impl SignalWindow {
    pub fn channel(&self) -> &ChannelConfig {
        &self.channel
    }

    pub fn start_time_us(&self) -> i64 {
        self.start_time_us
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.channel.sample_rate_hz
    }

    /// Timestamp of the sample just past the end of the window.
    pub fn end_time_us(&self) -> i64 {
        self.start_time_us + self.channel.offset_us(self.samples.len() as u64)
    }

    /// Same channel and timestamp, new samples. Length and finiteness are
    /// re-validated.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<SignalWindow, SignalError> {
        make_window(self.channel.clone(), self.start_time_us, samples)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Cuts a sample stream into windows of `window_len` samples advancing by
/// `hop_len`.
///
/// Window `k` starts at stream sample `k * hop_len` and carries the timestamp
/// `stream_start_us + round(k * hop_len * 1e6 / sample_rate_hz)`. Output does
/// not depend on how the input is chunked.
#[derive(Debug, Clone)]
pub struct Windower {
    channel: ChannelConfig,
    window_len: usize,
    hop_len: usize,
    stream_start_us: i64,
    /// Samples from stream index `buffer_start` onwards.
    pending: Vec<f64>,
    buffer_start: u64,
    next_window: u64,
}

impl Windower {
    pub fn new(
        channel: ChannelConfig,
        window_len: usize,
        hop_len: usize,
        stream_start_us: i64,
    ) -> Result<Self, SignalError> {
        if window_len < 2 || hop_len == 0 || hop_len > window_len {
            return Err(SignalError::InvalidWindowing {
                window_len,
                hop_len,
            });
        }
        Ok(Self {
            channel,
            window_len,
            hop_len,
            stream_start_us,
            pending: Vec::with_capacity(window_len * 2),
            buffer_start: 0,
            next_window: 0,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    pub fn channel(&self) -> &ChannelConfig {
        &self.channel
    }

    /// Samples currently held back waiting for a window to complete.
    pub fn retained(&self) -> usize {
        self.pending.len()
    }

    /// Start timestamp of window `k`.
    pub fn window_start_us(&self, k: u64) -> i64 {
        self.stream_start_us + self.channel.offset_us(k * self.hop_len as u64)
    }

    /// Start timestamp of the next window that will be emitted.
    pub fn next_window_start_us(&self) -> i64 {
        self.window_start_us(self.next_window)
    }

    /// Appends samples and returns every window completed by them.
    ///
    /// Samples are expected to be finite; ingestion rejects anything else.
    pub fn push_and_emit(&mut self, new_samples: &[f64]) -> Vec<SignalWindow> {
        debug_assert!(new_samples.iter().all(|x| x.is_finite()));
        self.pending.extend_from_slice(new_samples);
        let mut out = Vec::new();
        loop {
            let start = self.next_window * self.hop_len as u64;
            let offset = (start - self.buffer_start) as usize;
            if offset + self.window_len > self.pending.len() {
                break;
            }
            let samples = self.pending[offset..offset + self.window_len].to_vec();
            out.push(SignalWindow {
                channel: self.channel.clone(),
                start_time_us: self.window_start_us(self.next_window),
                samples,
            });
            self.next_window += 1;
        }
        // Drop everything before the next window's first sample.
        let keep_from = self.next_window * self.hop_len as u64;
        if keep_from > self.buffer_start {
            let drop = ((keep_from - self.buffer_start) as usize).min(self.pending.len());
            self.pending.drain(..drop);
            self.buffer_start += drop as u64;
        }
        out
    }
}
