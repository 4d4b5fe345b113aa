//! Time-domain features of a window: mean, standard deviation, RMS, crest
//! factor and kurtosis index.
//!
//! Conventions, fixed so results reproduce across implementations:
//!
//! * `std` uses the `N - 1` divisor.
//! * `rms` is `sqrt(mean(x^2))`; the mean square itself is kept as `energy`.
//! * `cf` is peak-to-valley over RMS, `(max - min) / rms`. For a signal
//!   symmetric about zero this is twice the usual peak/RMS crest factor.
//! * `ki` is the (non-excess) fourth standardized moment with the population
//!   (`N`) standard deviation, so Gaussian noise scores about 3 and a sine 1.5.

use thiserror::Error;

use crate::signal::SignalWindow;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FeatureError {
    #[error("window RMS is zero; crest factor undefined")]
    ZeroRms,
    #[error("window has zero variance; kurtosis undefined")]
    ZeroVariance,
}

/// The five features of one window plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub channel_id: String,
    pub start_time_us: i64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub rms: f64,
    pub cf: f64,
    pub ki: f64,
    /// Mean square, `rms^2`.
    pub energy: f64,
    /// Set when RMS or variance was zero and `cf`/`ki` were forced to 0.
    pub degenerate: bool,
}

pub fn mean(w: &SignalWindow) -> f64 {
    let xs = w.samples();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x == xs[0])
}

/// Sum of squared deviations from the mean; exactly zero for constant input.
fn sum_sq_dev(xs: &[f64], mu: f64) -> f64 {
    if is_constant(xs) {
        return 0.0;
    }
    xs.iter().map(|x| (x - mu) * (x - mu)).sum()
}

pub fn std(w: &SignalWindow) -> f64 {
    let xs = w.samples();
    (sum_sq_dev(xs, mean(w)) / (xs.len() - 1) as f64).sqrt()
}

/// Mean square of the window.
pub fn energy(w: &SignalWindow) -> f64 {
    let xs = w.samples();
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

pub fn rms(w: &SignalWindow) -> f64 {
    energy(w).sqrt()
}

fn peak_to_valley(xs: &[f64]) -> f64 {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

pub fn crest_factor(w: &SignalWindow) -> Result<f64, FeatureError> {
    let r = rms(w);
    if r == 0.0 {
        return Err(FeatureError::ZeroRms);
    }
    Ok(peak_to_valley(w.samples()) / r)
}

pub fn kurtosis_index(w: &SignalWindow) -> Result<f64, FeatureError> {
    let xs = w.samples();
    let n = xs.len() as f64;
    let mu = mean(w);
    let m2 = sum_sq_dev(xs, mu) / n;
    if m2 == 0.0 {
        return Err(FeatureError::ZeroVariance);
    }
    let m4 = xs.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / n;
    Ok(m4 / (m2 * m2))
}

/// All five features; degenerate windows get `cf = ki = 0` and a flag
/// instead of an error.
pub fn extract_features(w: &SignalWindow) -> FeatureVector {
    let xs = w.samples();
    let n = xs.len();
    let mu = mean(w);
    let ss = sum_sq_dev(xs, mu);
    let std = (ss / (n - 1) as f64).sqrt();
    let energy = energy(w);
    let rms = energy.sqrt();
    let mut degenerate = false;
    let cf = if rms > 0.0 {
        peak_to_valley(xs) / rms
    } else {
        degenerate = true;
        0.0
    };
    let m2 = ss / n as f64;
    let ki = if m2 > 0.0 {
        let m4 = xs.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / n as f64;
        m4 / (m2 * m2)
    } else {
        degenerate = true;
        0.0
    };
    FeatureVector {
        channel_id: w.channel().channel_id().to_string(),
        start_time_us: w.start_time_us(),
        n,
        mean: mu,
        std,
        rms,
        cf,
        ki,
        energy,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{make_window, ChannelConfig};
    use std::f64::consts::PI;

    fn win(xs: Vec<f64>) -> SignalWindow {
        make_window(ChannelConfig::acoustic(5000.0).unwrap(), 0, xs).unwrap()
    }

    /// Unit sine with an integer number of periods.
    fn sine(n: usize, periods: usize) -> SignalWindow {
        win((0..n)
            .map(|i| (2.0 * PI * periods as f64 * i as f64 / n as f64).sin())
            .collect())
    }

    fn square(n: usize) -> SignalWindow {
        win((0..n).map(|i| if (i / 8) % 2 == 0 { 1.0 } else { -1.0 }).collect())
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean(&win(vec![0.0; 4])), 0.0);
        assert_eq!(mean(&win(vec![1.0, 3.0])), 2.0);
        assert!(mean(&sine(1024, 7)).abs() < 1e-12);
    }

    #[test]
    fn std_examples() {
        assert_eq!(std(&win(vec![0.1; 3])), 0.0);
        assert!((std(&win(vec![-1.0, 1.0])) - 2f64.sqrt()).abs() < 1e-15);
        // (A / sqrt 2) * sqrt(N / (N - 1)) with A = 1, N = 1024.
        let expect = (0.5f64 * 1024.0 / 1023.0).sqrt();
        assert!((std(&sine(1024, 5)) - expect).abs() < 1e-12);
        assert!((std(&sine(1024, 5)) - 0.70746).abs() < 1e-4);
    }

    #[test]
    fn rms_examples() {
        assert_eq!(rms(&win(vec![-2.5; 6])), 2.5);
        assert!((rms(&sine(1024, 3)) - 0.70711).abs() < 1e-4);
        assert_eq!(rms(&square(64)), 1.0);
    }

    #[test]
    fn crest_factor_examples() {
        assert!((crest_factor(&sine(1024, 4)).unwrap() - 2.8284).abs() < 1e-3);
        assert_eq!(crest_factor(&square(64)).unwrap(), 2.0);
        assert_eq!(crest_factor(&win(vec![0.3; 5])).unwrap(), 0.0);
        assert_eq!(crest_factor(&win(vec![0.0; 5])), Err(FeatureError::ZeroRms));
    }

    #[test]
    fn kurtosis_examples() {
        assert!((kurtosis_index(&sine(4096, 11)).unwrap() - 1.5).abs() < 0.01);
        assert!((kurtosis_index(&square(64)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            kurtosis_index(&win(vec![2.0; 8])),
            Err(FeatureError::ZeroVariance)
        );
    }

    #[test]
    fn extract_all_zero_is_degenerate() {
        let fv = extract_features(&win(vec![0.0; 16]));
        assert!(fv.degenerate);
        assert_eq!((fv.mean, fv.std, fv.rms, fv.cf, fv.ki), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn extract_two_point() {
        let fv = extract_features(&win(vec![1.0, 3.0]));
        assert!(!fv.degenerate);
        assert_eq!(fv.mean, 2.0);
        assert!((fv.std - 1.41421).abs() < 1e-5);
        assert!((fv.rms - 5f64.sqrt()).abs() < 1e-15);
        assert!((fv.cf - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((fv.cf - 0.89443).abs() < 1e-5);
        // Two symmetric points about the mean: fourth moment / m2^2 = 1.
        assert!((fv.ki - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_sine_matches_individual_features() {
        let w = sine(4096, 16);
        let fv = extract_features(&w);
        assert!(!fv.degenerate);
        assert_eq!(fv.rms, rms(&w));
        assert_eq!(fv.cf, crest_factor(&w).unwrap());
        assert_eq!(fv.ki, kurtosis_index(&w).unwrap());
        assert_eq!(fv.std, std(&w));
        assert!((fv.energy - fv.rms * fv.rms).abs() < 1e-15);
    }

    #[test]
    fn constant_nonzero_window_flags_ki() {
        let fv = extract_features(&win(vec![0.7; 10]));
        assert!(fv.degenerate);
        assert_eq!(fv.cf, 0.0);
        assert_eq!(fv.ki, 0.0);
        assert!((fv.rms - 0.7).abs() < 1e-15);
    }
}
