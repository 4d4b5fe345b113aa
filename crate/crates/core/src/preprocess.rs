//! Signal conditioning: DC removal and the linear-phase band-pass used on the
//! acoustic path.
//!
//! The band-pass is a windowed-sinc FIR with a Kaiser window. Both transition
//! bands sit *inside* `[low_cut_hz, high_cut_hz]`, so the filter rejects
//! everything outside the nominal band (DC and Nyquist included for the
//! default 1-2499 Hz band at 5 kHz) and is flat within ripple over
//! `[low_cut + transition, high_cut - transition]`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::signal::SignalWindow;

/// Acoustic band edges used by default (Hz).
pub const ACOUSTIC_BAND_HZ: (f64, f64) = (1.0, 2499.0);
pub const DEFAULT_TRANSITION_HZ: f64 = 50.0;
pub const DEFAULT_STOPBAND_DB: f64 = 60.0;
pub const DEFAULT_MAX_TAPS: usize = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("invalid band {low_cut_hz}-{high_cut_hz} Hz (transition {transition_hz} Hz) at {sample_rate_hz} Hz")]
    InvalidBand {
        low_cut_hz: f64,
        high_cut_hz: f64,
        transition_hz: f64,
        sample_rate_hz: f64,
    },
    #[error("stopband attenuation must be at least 40 dB, got {0}")]
    AttenuationTooLow(f64),
    #[error("filter needs {taps} taps, more than the maximum of {max_taps}")]
    UnrealizableSpec { taps: usize, max_taps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPassSpec {
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub transition_width_hz: f64,
    pub stopband_atten_db: f64,
}

impl Default for BandPassSpec {
    fn default() -> Self {
        Self {
            low_cut_hz: ACOUSTIC_BAND_HZ.0,
            high_cut_hz: ACOUSTIC_BAND_HZ.1,
            transition_width_hz: DEFAULT_TRANSITION_HZ,
            stopband_atten_db: DEFAULT_STOPBAND_DB,
        }
    }
}

impl BandPassSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<(), PreprocessError> {
        let invalid = || PreprocessError::InvalidBand {
            low_cut_hz: self.low_cut_hz,
            high_cut_hz: self.high_cut_hz,
            transition_hz: self.transition_width_hz,
            sample_rate_hz,
        };
        let finite = [
            self.low_cut_hz,
            self.high_cut_hz,
            self.transition_width_hz,
            self.stopband_atten_db,
            sample_rate_hz,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid());
        }
        if !(self.stopband_atten_db >= 40.0) {
            return Err(PreprocessError::AttenuationTooLow(self.stopband_atten_db));
        }
        let nyquist = sample_rate_hz / 2.0;
        if !(self.low_cut_hz > 0.0
            && self.low_cut_hz < self.high_cut_hz
            && self.high_cut_hz < nyquist
            && self.transition_width_hz > 0.0)
        {
            return Err(invalid());
        }
        // Passband [low + tw, high - tw] must be non-empty.
        if self.low_cut_hz + self.transition_width_hz > self.high_cut_hz - self.transition_width_hz
        {
            return Err(invalid());
        }
        Ok(())
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= (half / k) * (half / k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser's empirical beta for a given attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Kaiser's tap-count estimate, forced odd.
pub fn kaiser_taps(atten_db: f64, transition_hz: f64, sample_rate_hz: f64) -> usize {
    let dw = 2.0 * PI * transition_hz / sample_rate_hz;
    let n = ((atten_db - 7.95) / (2.285 * dw)).ceil().max(1.0) as usize + 1;
    n | 1
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    let denom = bessel_i0(beta);
    (0..len)
        .map(|n| {
            let r = 2.0 * n as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Designs the band-pass with the default tap limit.
pub fn design_band_pass(
    spec: &BandPassSpec,
    sample_rate_hz: f64,
) -> Result<StreamingFilter, PreprocessError> {
    design_band_pass_with_limit(spec, sample_rate_hz, DEFAULT_MAX_TAPS)
}

pub fn design_band_pass_with_limit(
    spec: &BandPassSpec,
    sample_rate_hz: f64,
    max_taps: usize,
) -> Result<StreamingFilter, PreprocessError> {
    spec.validate(sample_rate_hz)?;
    // Each of the two band edges leaks its own ripple into the other's
    // stopband, so each edge is designed for half the allowed deviation.
    let design_db = spec.stopband_atten_db + 20.0 * 2f64.log10();
    let taps = kaiser_taps(design_db, spec.transition_width_hz, sample_rate_hz);
    if taps > max_taps {
        return Err(PreprocessError::UnrealizableSpec { taps, max_taps });
    }
    let window = kaiser_window(taps, kaiser_beta(design_db));
    let f1 = (spec.low_cut_hz + spec.transition_width_hz / 2.0) / sample_rate_hz;
    let f2 = (spec.high_cut_hz - spec.transition_width_hz / 2.0) / sample_rate_hz;
    let mid = (taps - 1) as f64 / 2.0;
    let mut coeffs: Vec<f64> = window
        .iter()
        .enumerate()
        .map(|(n, w)| {
            let m = n as f64 - mid;
            w * (2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m))
        })
        .collect();
    // Unit gain at the band centre.
    let centre = (f1 + f2) / 2.0 * sample_rate_hz;
    let g = response_magnitude(&coeffs, centre, sample_rate_hz);
    for c in &mut coeffs {
        *c /= g;
    }
    // Exact symmetry, independent of rounding in the window evaluation.
    for i in 0..taps / 2 {
        let avg = (coeffs[i] + coeffs[taps - 1 - i]) / 2.0;
        coeffs[i] = avg;
        coeffs[taps - 1 - i] = avg;
    }
    Ok(StreamingFilter::new(coeffs))
}

/// |H(f)| of an FIR tap sequence.
pub fn response_magnitude(taps: &[f64], freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let w = 2.0 * PI * freq_hz / sample_rate_hz;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &h) in taps.iter().enumerate() {
        let phase = w * n as f64;
        re += h * phase.cos();
        im -= h * phase.sin();
    }
    re.hypot(im)
}

/// FIR filter with a persistent, zero-primed delay line.
#[derive(Debug, Clone)]
pub struct StreamingFilter {
    taps: Vec<f64>,
    reversed: Vec<f64>,
    /// The last `taps.len() - 1` inputs.
    history: Vec<f64>,
    processed: u64,
}

impl StreamingFilter {
    pub fn new(taps: Vec<f64>) -> Self {
        assert!(!taps.is_empty(), "filter needs at least one tap");
        let reversed = taps.iter().rev().copied().collect();
        let history = vec![0.0; taps.len() - 1];
        Self {
            taps,
            reversed,
            history,
            processed: 0,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Group delay in samples, `(taps - 1) / 2`.
    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Total input samples consumed since construction or reset.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Whether output sample `index` (stream position) is still warming up.
    pub fn is_transient(&self, index: u64) -> bool {
        index < self.group_delay() as u64
    }

    pub fn response_magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        response_magnitude(&self.taps, freq_hz, sample_rate_hz)
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|h| *h = 0.0);
        self.processed = 0;
    }

    /// `y(n) = sum_k taps(k) x(n - k)`, continuing from previous calls.
    pub fn filter_stream(&mut self, samples: &[f64]) -> Vec<f64> {
        if samples.is_empty() {
            return Vec::new();
        }
        let l = self.taps.len();
        let mut ext = Vec::with_capacity(l - 1 + samples.len());
        ext.extend_from_slice(&self.history);
        ext.extend_from_slice(samples);
        let out = (0..samples.len())
            .map(|i| {
                ext[i..i + l]
                    .iter()
                    .zip(&self.reversed)
                    .map(|(x, h)| x * h)
                    .sum()
            })
            .collect();
        let tail = ext.len() - (l - 1);
        self.history.copy_from_slice(&ext[tail..]);
        self.processed += samples.len() as u64;
        out
    }
}

/// Subtracts the window mean from every sample.
pub fn remove_dc(w: &SignalWindow) -> SignalWindow {
    let n = w.len() as f64;
    let mean = w.samples().iter().sum::<f64>() / n;
    let centred = w.samples().iter().map(|x| x - mean).collect();
    w.with_samples(centred)
        .expect("centring preserves length and finiteness")
}
