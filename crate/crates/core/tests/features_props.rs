use printsense::features::extract_features;
use printsense::signal::{make_window, ChannelConfig, SignalWindow};
use proptest::prelude::*;

fn win(xs: Vec<f64>) -> SignalWindow {
    make_window(ChannelConfig::acoustic(5000.0).unwrap(), 0, xs).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 3..300)
        .prop_filter("needs spread", |v| v.iter().any(|&x| x != v[0]))
}

proptest! {
    #[test]
    fn scale_equivariance(xs in samples(), c in 1e-3f64..1e3) {
        let a = extract_features(&win(xs.clone()));
        let b = extract_features(&win(xs.iter().map(|x| c * x).collect()));
        prop_assert!(rel_close(b.rms, c * a.rms, 1e-9));
        prop_assert!(rel_close(b.std, c * a.std, 1e-9));
        prop_assert!((b.mean - c * a.mean).abs() <= 1e-9 * c * a.rms);
        prop_assert!(rel_close(b.cf, a.cf, 1e-9));
        prop_assert!(rel_close(b.ki, a.ki, 1e-9));
    }

    #[test]
    fn shift_behaviour(xs in samples(), d in -5.0f64..5.0) {
        let a = extract_features(&win(xs.clone()));
        let b = extract_features(&win(xs.iter().map(|x| x + d).collect()));
        prop_assert!(rel_close(b.std, a.std, 1e-9));
        prop_assert!(rel_close(b.ki, a.ki, 1e-6));
        prop_assert!((b.mean - (a.mean + d)).abs() <= 1e-9 * (1.0 + a.mean.abs() + d.abs()));
    }

    #[test]
    fn rms_squared_is_mean_square(xs in samples()) {
        let fv = extract_features(&win(xs.clone()));
        let direct = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        prop_assert!(rel_close(fv.rms * fv.rms, direct, 1e-12));
        prop_assert!(rel_close(fv.energy, direct, 1e-12));
    }

    #[test]
    fn permutation_invariance(xs in samples(), seed in any::<u64>()) {
        let mut perm = xs.clone();
        let mut rng = printsense::rng::Xoshiro256::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let a = extract_features(&win(xs));
        let b = extract_features(&win(perm));
        for (p, q) in [(a.mean, b.mean), (a.std, b.std), (a.rms, b.rms), (a.cf, b.cf), (a.ki, b.ki)] {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn symmetric_window_cf_is_twice_peak_over_rms(half in prop::collection::vec(0.0f64..10.0, 1..100)) {
        prop_assume!(half.iter().any(|&x| x > 0.0));
        let mut xs = half.clone();
        xs.extend(half.iter().map(|x| -x));
        let fv = extract_features(&win(xs.clone()));
        let peak = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(rel_close(fv.cf, 2.0 * peak / fv.rms, 1e-12));
    }
}
