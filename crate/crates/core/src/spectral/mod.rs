//! Magnitude spectra, spectrograms, peak picking and harmonic-series
//! detection.
//!
//! Magnitudes are one-sided and amplitude-calibrated: a sinusoid of amplitude
//! `A` centred on a bin reports `A` at that bin whatever the taper, because
//! each spectrum is divided by the taper's coherent gain (`sum(w)`, halved for
//! the interior bins). Decibels are relative to full scale (1.0).

mod export;
mod fft;
mod peaks;

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::signal::SignalWindow;

pub use export::{write_spectrogram_csv, write_spectrogram_pgm, DEFAULT_PGM_FLOOR_DB};
pub use fft::{fft, real_fft, Complex};
pub use peaks::{
    analyze_harmonics, detect_harmonic_series, find_peaks, Harmonic, HarmonicConfig,
    HarmonicReport, Peak, level_db_at,
};

/// Added to magnitudes before taking logarithms.
pub const DB_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("windows are inconsistent: {0}")]
    InconsistentWindows(String),
    #[error("no windows to analyze")]
    NoWindows,
    #[error("spectrum has no energy outside DC")]
    EmptySpectrum,
    #[error("invalid band {low_hz}-{high_hz} Hz (Nyquist {nyquist_hz} Hz)")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        nyquist_hz: f64,
    },
    #[error("no harmonic series with at least two corroborating orders")]
    NoSeries,
    #[error("no spectral peaks found")]
    NoPeaks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Taper {
    Rectangular,
    Hann,
}

impl Taper {
    /// Periodic taper coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

pub fn to_db(magnitude: f64) -> f64 {
    20.0 * (magnitude + DB_EPSILON).log10()
}

/// One-sided amplitude spectrum of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub channel_id: String,
    pub start_time_us: i64,
    pub bin_hz: f64,
    pub magnitudes: Vec<f64>,
    pub fft_len: usize,
    /// Samples before zero-padding.
    pub input_len: usize,
    pub taper: Taper,
    /// `sum(w)` over the input samples.
    pub taper_sum: f64,
}

impl Spectrum {
    pub fn num_bins(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.bin_hz * (self.fft_len / 2) as f64
    }

    pub fn was_zero_padded(&self) -> bool {
        self.fft_len != self.input_len
    }

    pub fn magnitudes_db(&self) -> Vec<f64> {
        self.magnitudes.iter().map(|&m| to_db(m)).collect()
    }

    /// `sum (w x)^2` recovered from the magnitudes via Parseval.
    ///
    /// With a rectangular taper this equals the window's sum of squares.
    pub fn tapered_energy(&self) -> f64 {
        let last = self.magnitudes.len() - 1;
        let total: f64 = self
            .magnitudes
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                if k == 0 || k == last {
                    let x = m * self.taper_sum;
                    x * x
                } else {
                    let x = m * self.taper_sum / 2.0;
                    2.0 * x * x
                }
            })
            .sum();
        total / self.fft_len as f64
    }
}

fn spectrum_from_samples(
    samples: &[f64],
    rate_hz: f64,
    taper: Taper,
    channel_id: &str,
    start_time_us: i64,
) -> Spectrum {
    let n = samples.len();
    let fft_len = n.next_power_of_two();
    let coeffs = taper.coefficients(n);
    let taper_sum: f64 = coeffs.iter().sum();
    let tapered: Vec<f64> = samples.iter().zip(&coeffs).map(|(x, w)| x * w).collect();
    let spec = real_fft(&tapered, fft_len);
    let half = fft_len / 2;
    let magnitudes = (0..=half)
        .map(|k| {
            let scale = if k == 0 || k == half { 1.0 } else { 2.0 };
            scale * spec[k].abs() / taper_sum
        })
        .collect();
    Spectrum {
        channel_id: channel_id.to_string(),
        start_time_us,
        bin_hz: rate_hz / fft_len as f64,
        magnitudes,
        fft_len,
        input_len: n,
        taper,
        taper_sum,
    }
}

/// Amplitude spectrum of a window, zero-padded to the next power of two.
pub fn magnitude_spectrum(w: &SignalWindow, taper: Taper) -> Spectrum {
    spectrum_from_samples(
        w.samples(),
        w.channel().sample_rate_hz(),
        taper,
        w.channel().channel_id(),
        w.start_time_us(),
    )
}

/// Power-averaged spectrum over equally long windows of one channel.
pub fn average_spectrum(windows: &[SignalWindow], taper: Taper) -> Result<Spectrum, SpectralError> {
    let first = windows.first().ok_or(SpectralError::NoWindows)?;
    check_same_channel(windows)?;
    let spectra: Vec<Spectrum> = windows
        .par_iter()
        .map(|w| magnitude_spectrum(w, taper))
        .collect();
    let count = spectra.len() as f64;
    let mut out = spectra[0].clone();
    for (k, m) in out.magnitudes.iter_mut().enumerate() {
        let p: f64 = spectra.iter().map(|s| s.magnitudes[k].powi(2)).sum();
        *m = (p / count).sqrt();
    }
    out.start_time_us = first.start_time_us();
    Ok(out)
}

fn check_same_channel(windows: &[SignalWindow]) -> Result<(), SpectralError> {
    let first = &windows[0];
    for w in &windows[1..] {
        if w.channel().channel_id() != first.channel().channel_id()
            || w.channel().sample_rate_hz() != first.channel().sample_rate_hz()
        {
            return Err(SpectralError::InconsistentWindows(format!(
                "mixed channels {} and {}",
                first.channel().channel_id(),
                w.channel().channel_id()
            )));
        }
        if w.len() != first.len() {
            return Err(SpectralError::InconsistentWindows(format!(
                "window lengths {} and {}",
                first.len(),
                w.len()
            )));
        }
    }
    Ok(())
}

/// Fraction of non-DC energy inside `[band_low_hz, band_high_hz]`.
pub fn band_energy_ratio(
    s: &Spectrum,
    band_low_hz: f64,
    band_high_hz: f64,
) -> Result<f64, SpectralError> {
    band_ratio_of(&s.magnitudes, s.bin_hz, band_low_hz, band_high_hz)
}

fn band_ratio_of(
    magnitudes: &[f64],
    bin_hz: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, SpectralError> {
    let nyquist = bin_hz * (magnitudes.len() - 1) as f64;
    if !(lo >= 0.0 && lo < hi && hi <= nyquist) {
        return Err(SpectralError::InvalidBand {
            low_hz: lo,
            high_hz: hi,
            nyquist_hz: nyquist,
        });
    }
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, &m) in magnitudes.iter().enumerate().skip(1) {
        let p = m * m;
        total += p;
        let f = k as f64 * bin_hz;
        if f >= lo && f <= hi {
            inside += p;
        }
    }
    if total == 0.0 {
        return Err(SpectralError::EmptySpectrum);
    }
    Ok(inside / total)
}

/// Time-frequency magnitude matrix in dB full scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub channel_id: String,
    pub frame_times_us: Vec<i64>,
    pub bin_hz: f64,
    /// `frames[t][bin]`, `20 log10(mag + 1e-12)`.
    pub frames: Vec<Vec<f64>>,
    magnitudes: Vec<Vec<f64>>,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_bins(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn bin_frequencies(&self) -> Vec<f64> {
        (0..self.num_bins()).map(|k| k as f64 * self.bin_hz).collect()
    }

    /// Index of the loudest bin in each frame.
    pub fn argmax_bins(&self) -> Vec<usize> {
        self.frames
            .iter()
            .map(|f| {
                f.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    })
                    .0
            })
            .collect()
    }

    /// Per-frame `band_energy_ratio`; silent frames yield `EmptySpectrum`.
    pub fn band_energy_ratios(
        &self,
        band_low_hz: f64,
        band_high_hz: f64,
    ) -> Vec<Result<f64, SpectralError>> {
        self.magnitudes
            .iter()
            .map(|m| band_ratio_of(m, self.bin_hz, band_low_hz, band_high_hz))
            .collect()
    }
}

/// Spectrogram of consecutive windows of one channel with a constant hop.
pub fn spectrogram(windows: &[SignalWindow], taper: Taper) -> Result<Spectrogram, SpectralError> {
    let first = windows.first().ok_or(SpectralError::NoWindows)?;
    check_same_channel(windows)?;
    if windows.len() > 2 {
        let hop0 = windows[1].start_time_us() - windows[0].start_time_us();
        for pair in windows.windows(2) {
            let hop = pair[1].start_time_us() - pair[0].start_time_us();
            // Timestamps are rounded to whole microseconds.
            if hop <= 0 || (hop - hop0).abs() > 1 {
                return Err(SpectralError::InconsistentWindows(format!(
                    "irregular hop: {hop0} us then {hop} us"
                )));
            }
        }
    } else if windows.len() == 2 && windows[1].start_time_us() <= windows[0].start_time_us() {
        return Err(SpectralError::InconsistentWindows(
            "frame times not increasing".into(),
        ));
    }
    let spectra: Vec<Spectrum> = windows
        .par_iter()
        .map(|w| magnitude_spectrum(w, taper))
        .collect();
    let bin_hz = spectra[0].bin_hz;
    let frames = spectra.iter().map(Spectrum::magnitudes_db).collect();
    Ok(Spectrogram {
        channel_id: first.channel().channel_id().to_string(),
        frame_times_us: windows.iter().map(SignalWindow::start_time_us).collect(),
        bin_hz,
        frames,
        magnitudes: spectra.into_iter().map(|s| s.magnitudes).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{make_window, ChannelConfig, Windower};

    fn win(rate: f64, xs: Vec<f64>) -> SignalWindow {
        make_window(ChannelConfig::acoustic(rate).unwrap(), 0, xs).unwrap()
    }

    fn tone(freq: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn bin_centred_sine_rectangular() {
        let rate = 1024.0;
        let s = magnitude_spectrum(&win(rate, tone(100.0, rate, 1024)), Taper::Rectangular);
        assert_eq!(s.num_bins(), 513);
        assert!((s.magnitudes[100] - 1.0).abs() < 0.01);
        for (k, &m) in s.magnitudes.iter().enumerate() {
            if k != 100 {
                assert!(m < 1e-10, "bin {k}: {m}");
            }
        }
    }

    #[test]
    fn hann_amplitude_calibrated_within_0_1_db() {
        let rate = 1024.0;
        let s = magnitude_spectrum(&win(rate, tone(64.0, rate, 1024)), Taper::Hann);
        assert!(to_db(s.magnitudes[64]).abs() < 0.1);
    }

    #[test]
    fn zero_window_zero_spectrum() {
        let s = magnitude_spectrum(&win(5000.0, vec![0.0; 300]), Taper::Hann);
        assert!(s.was_zero_padded());
        assert_eq!(s.fft_len, 512);
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn parseval_rectangular_with_padding() {
        let xs: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64 - 50.0) / 50.0).collect();
        let energy: f64 = xs.iter().map(|x| x * x).sum();
        let s = magnitude_spectrum(&win(5000.0, xs), Taper::Rectangular);
        assert!((s.tapered_energy() - energy).abs() / energy < 1e-6);
    }

    #[test]
    fn band_ratio_examples() {
        let rate = 5000.0;
        let n = 4096;
        let s = magnitude_spectrum(&win(rate, tone(400.0, rate, n)), Taper::Hann);
        assert!(band_energy_ratio(&s, 100.0, 1000.0).unwrap() >= 0.99);
        let s = magnitude_spectrum(&win(rate, tone(2000.0, rate, n)), Taper::Hann);
        assert!(band_energy_ratio(&s, 100.0, 1000.0).unwrap() <= 0.01);
        let two: Vec<f64> = tone(500.0, rate, n)
            .iter()
            .zip(tone(1500.0, rate, n))
            .map(|(a, b)| a + b)
            .collect();
        let s = magnitude_spectrum(&win(rate, two), Taper::Hann);
        let r = band_energy_ratio(&s, 100.0, 1000.0).unwrap();
        assert!((r - 0.5).abs() < 0.02, "ratio {r}");
        let full = band_energy_ratio(&s, 1e-9, s.nyquist_hz()).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_ratio_errors() {
        let s = magnitude_spectrum(&win(5000.0, vec![0.0; 64]), Taper::Hann);
        assert_eq!(
            band_energy_ratio(&s, 100.0, 1000.0),
            Err(SpectralError::EmptySpectrum)
        );
        assert!(matches!(
            band_energy_ratio(&s, 100.0, 3000.0),
            Err(SpectralError::InvalidBand { .. })
        ));
    }

    fn stream_windows(xs: &[f64], rate: f64, len: usize, hop: usize) -> Vec<SignalWindow> {
        let ch = ChannelConfig::acoustic(rate).unwrap();
        Windower::new(ch, len, hop, 0).unwrap().push_and_emit(xs)
    }

    #[test]
    fn constant_tone_same_argmax() {
        let xs = tone(400.0, 5000.0, 20_000);
        let sg = spectrogram(&stream_windows(&xs, 5000.0, 2048, 1024), Taper::Hann).unwrap();
        let arg = sg.argmax_bins();
        assert!(arg.iter().all(|&b| b == arg[0]));
        assert_eq!(arg[0], (400.0f64 / sg.bin_hz).round() as usize);
    }

    #[test]
    fn silence_sits_at_floor() {
        let sg = spectrogram(
            &stream_windows(&[0.0; 8192], 5000.0, 2048, 1024),
            Taper::Hann,
        )
        .unwrap();
        for f in &sg.frames {
            for &v in f {
                assert!((v - -240.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chirp_argmax_non_decreasing() {
        // Linear chirp 100 -> 1000 Hz over 10 s.
        let rate = 5000.0;
        let dur = 10.0;
        let n = (rate * dur) as usize;
        let k = (1000.0 - 100.0) / dur;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                (2.0 * PI * (100.0 * t + 0.5 * k * t * t)).sin()
            })
            .collect();
        let wins = stream_windows(&xs, rate, 2048, 1024);
        let sg = spectrogram(&wins, Taper::Hann).unwrap();
        let arg = sg.argmax_bins();
        for pair in arg.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        // Oracle: instantaneous frequency at each frame centre.
        for (w, &b) in wins.iter().zip(&arg) {
            let tc = (w.start_time_us() as f64 / 1e6) + 1024.0 / rate;
            let f_inst = 100.0 + k * tc;
            // The tone sweeps k * 2048 / rate Hz within one window.
            let spread = k * 2048.0 / rate / 2.0;
            assert!((b as f64 * sg.bin_hz - f_inst).abs() <= spread + 2.0 * sg.bin_hz);
        }
        assert!(arg[0] as f64 * sg.bin_hz < 150.0);
        assert!(*arg.last().unwrap() as f64 * sg.bin_hz > 950.0);
    }

    #[test]
    fn inconsistent_windows_rejected() {
        let a = make_window(ChannelConfig::acoustic(5000.0).unwrap(), 0, vec![0.0; 8]).unwrap();
        let b = make_window(
            ChannelConfig::accelerometer(crate::signal::Axis::X, 5000.0).unwrap(),
            1600,
            vec![0.0; 8],
        )
        .unwrap();
        assert!(matches!(
            spectrogram(&[a.clone(), b], Taper::Hann),
            Err(SpectralError::InconsistentWindows(_))
        ));
        let c = a.with_samples(vec![0.0; 8]).unwrap();
        let mk = |t| {
            make_window(ChannelConfig::acoustic(5000.0).unwrap(), t, vec![0.0; 8]).unwrap()
        };
        assert!(spectrogram(&[c, mk(800), mk(2400)], Taper::Hann).is_err());
    }
}
