use crate::signal::{ChannelConfig, Windower};

use super::{average_spectrum, to_db, SpectralError, Spectrum, Taper};

/// A spectral local maximum. `freq_hz` and `magnitude_db` are refined by
/// parabolic interpolation over the neighbouring bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub freq_hz: f64,
    pub magnitude_db: f64,
}

fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (pct.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

/// Local maxima at least `min_prominence_db` above the `floor_percentile`-th
/// percentile of all bin levels, loudest first.
///
/// The DC and Nyquist bins are never reported.
pub fn find_peaks(s: &Spectrum, min_prominence_db: f64, floor_percentile: f64) -> Vec<Peak> {
    let db = s.magnitudes_db();
    if db.len() < 3 {
        return Vec::new();
    }
    let threshold = percentile(&db, floor_percentile) + min_prominence_db;
    let mut peaks: Vec<Peak> = (1..db.len() - 1)
        .filter(|&k| db[k] > db[k - 1] && db[k] >= db[k + 1] && db[k] >= threshold)
        .map(|k| {
            let (a, b, c) = (db[k - 1], db[k], db[k + 1]);
            let denom = a - 2.0 * b + c;
            let delta = if denom == 0.0 {
                0.0
            } else {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            };
            Peak {
                bin: k,
                freq_hz: (k as f64 + delta) * s.bin_hz,
                magnitude_db: b - 0.25 * (a - c) * delta,
            }
        })
        .collect();
    peaks.sort_by(|p, q| {
        q.magnitude_db
            .total_cmp(&p.magnitude_db)
            .then(p.bin.cmp(&q.bin))
    });
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub order: u32,
    pub freq_hz: f64,
    pub magnitude_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReport {
    pub fundamental_hz: f64,
    pub harmonics: Vec<Harmonic>,
    /// Matched orders over `max_order`.
    pub confidence: f64,
}

struct Candidate {
    matches: Vec<(u32, Peak)>,
    linear_sum: f64,
    freq: f64,
}

/// Picks the fundamental whose integer multiples are corroborated by the most
/// peaks (then by their summed linear magnitude, then the lower frequency).
///
/// Every peak is tried as order 1; order `k` matches the peak closest to
/// `k * f` if it lies within `tolerance_bins * bin_hz`. The reported
/// fundamental is the least-squares fit `sum(k f_k) / sum(k^2)` over the
/// matched orders.
pub fn detect_harmonic_series(
    peaks: &[Peak],
    bin_hz: f64,
    max_order: u32,
    tolerance_bins: f64,
) -> Result<HarmonicReport, SpectralError> {
    let mut sorted = peaks.to_vec();
    sorted.sort_by(|a, b| {
        a.freq_hz
            .total_cmp(&b.freq_hz)
            .then(b.magnitude_db.total_cmp(&a.magnitude_db))
    });
    let tol = tolerance_bins * bin_hz;
    let mut best: Option<Candidate> = None;
    for cand in &sorted {
        if cand.freq_hz <= 0.0 {
            continue;
        }
        let mut matches = Vec::new();
        for k in 1..=max_order {
            let target = k as f64 * cand.freq_hz;
            let closest = sorted
                .iter()
                .map(|p| ((p.freq_hz - target).abs(), p))
                .filter(|(d, _)| *d <= tol)
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((_, p)) = closest {
                matches.push((k, *p));
            }
        }
        let linear_sum = matches
            .iter()
            .map(|(_, p)| 10f64.powf(p.magnitude_db / 20.0))
            .sum();
        let c = Candidate {
            matches,
            linear_sum,
            freq: cand.freq_hz,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                c.matches.len() > b.matches.len()
                    || (c.matches.len() == b.matches.len() && c.linear_sum > b.linear_sum)
            }
        };
        if better {
            best = Some(c);
        }
    }
    let best = best.ok_or(SpectralError::NoSeries)?;
    if best.matches.len() < 2 {
        return Err(SpectralError::NoSeries);
    }
    let num: f64 = best
        .matches
        .iter()
        .map(|(k, p)| *k as f64 * p.freq_hz)
        .sum();
    let den: f64 = best.matches.iter().map(|(k, _)| (*k as f64).powi(2)).sum();
    let fundamental_hz = if den > 0.0 { num / den } else { best.freq };
    Ok(HarmonicReport {
        fundamental_hz,
        harmonics: best
            .matches
            .iter()
            .map(|(k, p)| Harmonic {
                order: *k,
                freq_hz: p.freq_hz,
                magnitude_db: p.magnitude_db,
            })
            .collect(),
        confidence: best.matches.len() as f64 / max_order as f64,
    })
}

/// Settings for whole-recording harmonic analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicConfig {
    pub fft_len: usize,
    pub hop_len: usize,
    pub min_prominence_db: f64,
    pub floor_percentile: f64,
    pub max_order: u32,
    pub tolerance_bins: f64,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            fft_len: 4096,
            hop_len: 2048,
            min_prominence_db: 12.0,
            floor_percentile: 50.0,
            max_order: 8,
            tolerance_bins: 1.0,
        }
    }
}

/// Averages Hann spectra over the recording, picks peaks and fits a
/// harmonic series. Recordings shorter than one frame are zero-padded.
pub fn analyze_harmonics(
    samples: &[f64],
    channel: &ChannelConfig,
    cfg: &HarmonicConfig,
) -> Result<(HarmonicReport, Spectrum), SpectralError> {
    let spectrum = if samples.len() < cfg.fft_len {
        if samples.len() < 2 {
            return Err(SpectralError::NoWindows);
        }
        let mut padded = samples.to_vec();
        padded.resize(cfg.fft_len, 0.0);
        let w = crate::signal::make_window(channel.clone(), 0, padded)
            .map_err(|e| SpectralError::InconsistentWindows(e.to_string()))?;
        average_spectrum(&[w], Taper::Hann)?
    } else {
        let mut windower = Windower::new(channel.clone(), cfg.fft_len, cfg.hop_len, 0)
            .map_err(|e| SpectralError::InconsistentWindows(e.to_string()))?;
        average_spectrum(&windower.push_and_emit(samples), Taper::Hann)?
    };
    let peaks = find_peaks(&spectrum, cfg.min_prominence_db, cfg.floor_percentile);
    if peaks.is_empty() {
        return Err(SpectralError::NoPeaks);
    }
    let report =
        detect_harmonic_series(&peaks, spectrum.bin_hz, cfg.max_order, cfg.tolerance_bins)?;
    Ok((report, spectrum))
}

/// Level of the spectrum at a frequency, in dB (nearest bin).
pub fn level_db_at(s: &Spectrum, freq_hz: f64) -> f64 {
    let k = (freq_hz / s.bin_hz).round() as usize;
    to_db(s.magnitudes[k.min(s.magnitudes.len() - 1)])
}
