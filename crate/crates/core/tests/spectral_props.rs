use printsense::rng::Xoshiro256;
use printsense::signal::{make_window, ChannelConfig};
use printsense::spectral::{
    band_energy_ratio, detect_harmonic_series, magnitude_spectrum, real_fft, Peak, Taper,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn dft(x: &[f64], n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

proptest! {
    #[test]
    fn fft_matches_dft(seed in any::<u64>(), len in 1usize..=256) {
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let n = len.next_power_of_two();
        let fast = real_fft(&x, n);
        for (k, (re, im)) in dft(&x, n).into_iter().enumerate() {
            prop_assert!((fast[k].re - re).abs() <= 1e-9 && (fast[k].im - im).abs() <= 1e-9);
        }
    }

    #[test]
    fn parseval_rectangular(xs in prop::collection::vec(-1.0f64..1.0, 2..300)) {
        let energy: f64 = xs.iter().map(|x| x * x).sum();
        let w = make_window(ChannelConfig::acoustic(5000.0).unwrap(), 0, xs).unwrap();
        let s = magnitude_spectrum(&w, Taper::Rectangular);
        prop_assert!((s.tapered_energy() - energy).abs() <= 1e-6 * energy.max(1e-300));
    }

    #[test]
    fn circular_shift_keeps_magnitudes(seed in any::<u64>(), log_n in 1u32..9, shift in 0usize..512) {
        let n = 1usize << log_n;
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mut y = x.clone();
        y.rotate_left(shift % n);
        let ch = ChannelConfig::acoustic(5000.0).unwrap();
        let a = magnitude_spectrum(&make_window(ch.clone(), 0, x).unwrap(), Taper::Rectangular);
        let b = magnitude_spectrum(&make_window(ch, 0, y).unwrap(), Taper::Rectangular);
        for (p, q) in a.magnitudes.iter().zip(&b.magnitudes) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn harmonic_detection_ignores_peak_order(
        f0 in 50.0f64..400.0,
        orders in prop::collection::btree_set(1u32..7, 2..6),
        extras in prop::collection::vec((30.0f64..2400.0, -60.0f64..0.0), 0..4),
        seed in any::<u64>(),
    ) {
        let mut peaks: Vec<Peak> = orders
            .iter()
            .map(|&k| Peak { bin: 0, freq_hz: k as f64 * f0, magnitude_db: -(k as f64) * 3.0 })
            .chain(extras.iter().map(|&(f, db)| Peak { bin: 0, freq_hz: f, magnitude_db: db }))
            .collect();
        let reference = detect_harmonic_series(&peaks, 1.22, 8, 1.0);
        let mut rng = Xoshiro256::seed_from_u64(seed);
        for i in (1..peaks.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            peaks.swap(i, j);
        }
        prop_assert_eq!(detect_harmonic_series(&peaks, 1.22, 8, 1.0), reference);
    }

    #[test]
    fn full_band_ratio_is_one(seed in any::<u64>(), log_n in 2u32..11) {
        let n = 1usize << log_n;
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let w = make_window(ChannelConfig::acoustic(5000.0).unwrap(), 0, x).unwrap();
        let s = magnitude_spectrum(&w, Taper::Hann);
        let r = band_energy_ratio(&s, 1e-9, s.nyquist_hz()).unwrap();
        prop_assert!((r - 1.0).abs() < 1e-12);
    }
}
