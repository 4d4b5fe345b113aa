//! Rule-based state and motion classification, debouncing and condition
//! events.
//!
//! Machine states come from the acoustic channel: each state owns an interval
//! per feature over `(rms, cf, ki)` and a window scores the fraction of its
//! three features falling inside. The best score wins; ties go to the more
//! severe state (`Blocked > SemiBlocked > Runout > Loading > Normal`).
//!
//! Motion regimes come from the X/Y accelerometer axes via fixed rules over
//! RMS, crest factor and the reversal rate.

mod events;
mod thresholds;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::features::FeatureVector;
use crate::signal::SignalWindow;

pub use events::{
    run_monitor, ConditionEvent, Debouncer, DebounceOutcome, EventKind, EventQueue, MotionDecision,
    MotionTracker, StateDecision, StateTracker, ACCEL_EVENT_CHANNEL,
};
pub use thresholds::{Interval, MotionThresholds, StateBounds, ThresholdConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("degenerate feature vector (silent or constant window)")]
    DegenerateInput,
    #[error("accelerometer windows start {skew_us} us apart")]
    MisalignedWindows { skew_us: i64 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MachineState {
    Normal,
    SemiBlocked,
    Blocked,
    Runout,
    Loading,
}

impl MachineState {
    pub const ALL: [MachineState; 5] = [
        MachineState::Normal,
        MachineState::SemiBlocked,
        MachineState::Blocked,
        MachineState::Runout,
        MachineState::Loading,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MachineState::Normal => "normal",
            MachineState::SemiBlocked => "semi_blocked",
            MachineState::Blocked => "blocked",
            MachineState::Runout => "runout",
            MachineState::Loading => "loading",
        }
    }

    /// Higher is more severe.
    pub fn severity(self) -> u8 {
        match self {
            MachineState::Normal => 0,
            MachineState::Loading => 1,
            MachineState::Runout => 2,
            MachineState::SemiBlocked => 3,
            MachineState::Blocked => 4,
        }
    }

    /// Whether the extruder motors run in this state.
    pub fn motors_running(self) -> bool {
        matches!(
            self,
            MachineState::Normal | MachineState::SemiBlocked | MachineState::Blocked
        )
    }
}

impl fmt::Display for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MachineState {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MachineState::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MotionRegime {
    Continuous,
    ZigZag,
    PointToPoint,
    Idle,
}

impl MotionRegime {
    pub const ALL: [MotionRegime; 4] = [
        MotionRegime::Continuous,
        MotionRegime::ZigZag,
        MotionRegime::PointToPoint,
        MotionRegime::Idle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MotionRegime::Continuous => "continuous",
            MotionRegime::ZigZag => "zigzag",
            MotionRegime::PointToPoint => "point_to_point",
            MotionRegime::Idle => "idle",
        }
    }
}

impl fmt::Display for MotionRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionRegime {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MotionRegime::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownLabel(s.to_string()))
    }
}

/// Fraction of `(rms, cf, ki)` inside each state's intervals, in
/// `MachineState::ALL` order.
pub fn state_scores(fv: &FeatureVector, cfg: &ThresholdConfig) -> [f64; 5] {
    MachineState::ALL.map(|s| cfg.state(s).score(fv))
}

/// Best-scoring state and its score.
pub fn classify_state(
    fv: &FeatureVector,
    cfg: &ThresholdConfig,
) -> Result<(MachineState, f64), ClassifyError> {
    if fv.degenerate {
        return Err(ClassifyError::DegenerateInput);
    }
    let scores = state_scores(fv, cfg);
    let mut best = (MachineState::Normal, f64::NEG_INFINITY);
    for (state, score) in MachineState::ALL.into_iter().zip(scores) {
        if score > best.1 || (score == best.1 && state.severity() > best.0.severity()) {
            best = (state, score);
        }
    }
    Ok(best)
}

/// Motion regime of one pair of DC-free X/Y windows.
pub fn classify_motion(
    fx: &FeatureVector,
    fy: &FeatureVector,
    reversal_rate_hz: f64,
    cfg: &ThresholdConfig,
) -> Result<MotionRegime, ClassifyError> {
    let skew_us = (fx.start_time_us - fy.start_time_us).abs();
    if skew_us > cfg.max_skew_us {
        return Err(ClassifyError::MisalignedWindows { skew_us });
    }
    let m = &cfg.motion;
    let dominant = if fy.rms > fx.rms { fy } else { fx };
    let rms = dominant.rms;
    Ok(if rms < m.idle_rms_max {
        MotionRegime::Idle
    } else if rms >= m.zigzag_rms_min && reversal_rate_hz >= m.zigzag_reversal_min_hz {
        MotionRegime::ZigZag
    } else if rms >= m.p2p_rms_min && dominant.cf >= m.p2p_cf_min {
        MotionRegime::PointToPoint
    } else {
        MotionRegime::Continuous
    })
}

/// Reversals per second with the default floor and smoothing.
pub fn reversal_rate(w_x: &SignalWindow, w_y: &SignalWindow) -> f64 {
    let m = MotionThresholds::default();
    reversal_rate_with(w_x, w_y, m.reversal_floor_g, m.smoothing_len)
}

/// Counts sign changes of the dominant axis (larger variance) after DC
/// removal and a `smoothing_len`-point moving average, divided by the window
/// duration.
///
/// A sign is only registered once the smoothed signal leaves
/// `[-floor_g, floor_g]`, so noise below the floor never counts.
pub fn reversal_rate_with(
    w_x: &SignalWindow,
    w_y: &SignalWindow,
    floor_g: f64,
    smoothing_len: usize,
) -> f64 {
    let centred = |xs: &[f64]| -> Vec<f64> {
        let mu = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| x - mu).collect()
    };
    let (x, y) = (centred(w_x.samples()), centred(w_y.samples()));
    let var = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let dominant = if var(&y) > var(&x) { y } else { x };
    let m = smoothing_len.max(1).min(dominant.len());
    let smoothed: Vec<f64> = dominant
        .windows(m)
        .map(|w| w.iter().sum::<f64>() / m as f64)
        .collect();
    let mut sign = 0i8;
    let mut count = 0u32;
    for v in smoothed {
        let s = if v > floor_g {
            1
        } else if v < -floor_g {
            -1
        } else {
            0
        };
        if s != 0 {
            if sign != 0 && s != sign {
                count += 1;
            }
            sign = s;
        }
    }
    count as f64 / w_x.duration_s()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::signal::{make_window, Axis, ChannelConfig};

    fn fv(rms: f64, cf: f64, ki: f64) -> FeatureVector {
        FeatureVector {
            channel_id: "acoustic".into(),
            start_time_us: 0,
            n: 2048,
            mean: 0.0,
            std: rms,
            rms,
            cf,
            ki,
            energy: rms * rms,
            degenerate: false,
        }
    }

    fn cfg() -> ThresholdConfig {
        let mut c = ThresholdConfig::default();
        c.set_state(
            MachineState::Normal,
            StateBounds::new((0.10, 0.20), (5.0, 9.0), (2.5, 3.5)),
        );
        c.set_state(
            MachineState::SemiBlocked,
            StateBounds::new((0.08, 0.15), (7.0, 14.0), (3.8, 8.0)),
        );
        c.set_state(
            MachineState::Blocked,
            StateBounds::new((0.0, 0.05), (3.0, 5.0), (1.5, 2.4)),
        );
        c.set_state(
            MachineState::Runout,
            StateBounds::new((0.0, 0.09), (5.0, 9.0), (2.5, 3.5)),
        );
        c.set_state(
            MachineState::Loading,
            StateBounds::new((0.01, 0.04), (15.0, 80.0), (8.0, 200.0)),
        );
        c
    }

    /// Containment counted directly from the bounds, one state at a time.
    fn brute_force(f: &FeatureVector, c: &ThresholdConfig) -> (MachineState, f64) {
        let mut best: Option<(MachineState, f64)> = None;
        for s in MachineState::ALL {
            let b = c.state(s);
            let inside = [b.rms.contains(f.rms), b.cf.contains(f.cf), b.ki.contains(f.ki)]
                .iter()
                .filter(|x| **x)
                .count() as f64
                / 3.0;
            best = match best {
                Some((bs, bv))
                    if bv > inside || (bv == inside && bs.severity() > s.severity()) =>
                {
                    Some((bs, bv))
                }
                _ => Some((s, inside)),
            };
        }
        best.unwrap()
    }

    #[test]
    fn unique_normal_match() {
        assert_eq!(
            classify_state(&fv(0.17, 6.0, 3.0), &cfg()).unwrap(),
            (MachineState::Normal, 1.0)
        );
    }

    #[test]
    fn loading_by_crest_factor() {
        assert_eq!(
            classify_state(&fv(0.02, 30.0, 20.0), &cfg()).unwrap(),
            (MachineState::Loading, 1.0)
        );
    }

    #[test]
    fn semi_blocked_wins_on_kurtosis() {
        let f = fv(0.12, 8.0, 5.0);
        let got = classify_state(&f, &cfg()).unwrap();
        assert_eq!(got.0, MachineState::SemiBlocked);
        assert_eq!(got, brute_force(&f, &cfg()));
    }

    #[test]
    fn ties_go_to_severity() {
        // Inside Normal and Runout on cf/ki, inside neither on rms.
        let f = fv(0.095, 6.0, 3.0);
        let got = classify_state(&f, &cfg()).unwrap();
        assert_eq!(got, (MachineState::Runout, 2.0 / 3.0));
        // Matching nothing at all falls to the most severe state.
        assert_eq!(
            classify_state(&fv(9.0, 999.0, 999.0), &cfg()).unwrap(),
            (MachineState::Blocked, 0.0)
        );
    }

    #[test]
    fn degenerate_is_error() {
        let mut f = fv(0.0, 0.0, 0.0);
        f.degenerate = true;
        assert_eq!(
            classify_state(&f, &cfg()),
            Err(ClassifyError::DegenerateInput)
        );
    }

    #[test]
    fn brute_force_agrees_on_grid() {
        let c = cfg();
        for rms in [0.0, 0.02, 0.045, 0.085, 0.12, 0.18, 0.3] {
            for cf in [2.0, 4.0, 6.0, 8.0, 12.0, 30.0] {
                for ki in [1.8, 3.0, 4.5, 12.0] {
                    let f = fv(rms, cf, ki);
                    assert_eq!(classify_state(&f, &c).unwrap(), brute_force(&f, &c));
                }
            }
        }
    }

    fn accel(axis: Axis, xs: Vec<f64>) -> SignalWindow {
        make_window(ChannelConfig::accelerometer(axis, 2000.0).unwrap(), 0, xs).unwrap()
    }

    #[test]
    fn reversal_constant_is_zero() {
        let x = accel(Axis::X, vec![0.7; 2000]);
        let y = accel(Axis::Y, vec![0.0; 2000]);
        assert_eq!(reversal_rate(&x, &y), 0.0);
    }

    #[test]
    fn reversal_square_wave() {
        // 10 Hz square wave: 100 samples per half period at 2 kHz.
        let xs: Vec<f64> = (0..2000)
            .map(|i| if (i / 100) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let brute = xs.windows(2).filter(|p| p[0] != p[1]).count() as f64;
        let x = accel(Axis::X, xs);
        let y = accel(Axis::Y, vec![0.0; 2000]);
        let r = reversal_rate(&x, &y);
        assert!((r - 20.0).abs() <= 1.0, "{r}");
        assert!((r - brute).abs() <= 1.0);
    }

    #[test]
    fn reversal_uses_dominant_axis() {
        let xs: Vec<f64> = (0..2000)
            .map(|i| if (i / 100) % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let ys: Vec<f64> = (0..2000)
            .map(|i| if (i / 200) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let r = reversal_rate(&accel(Axis::X, xs), &accel(Axis::Y, ys));
        assert!((r - 10.0).abs() <= 1.0, "{r}");
    }

    #[test]
    fn reversal_noise_below_floor() {
        let mut rng = crate::rng::Xoshiro256::seed_from_u64(11);
        let xs: Vec<f64> = rng.normals(2000).into_iter().map(|v| 0.01 * v).collect();
        let r = reversal_rate(&accel(Axis::X, xs), &accel(Axis::Y, vec![0.0; 2000]));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn motion_rules() {
        let c = ThresholdConfig::default();
        let x = accel(Axis::X, vec![0.0; 1024]);
        let f0 = extract_features(&x);
        let mut f0y = f0.clone();
        f0y.channel_id = "accel_y".into();
        assert_eq!(
            classify_motion(&f0, &f0y, 0.0, &c).unwrap(),
            MotionRegime::Idle
        );
        let mut loud = fv(0.4, 3.0, 1.5);
        loud.channel_id = "accel_x".into();
        assert_eq!(
            classify_motion(&loud, &f0y, 10.0, &c).unwrap(),
            MotionRegime::ZigZag
        );
        assert_eq!(
            classify_motion(&loud, &f0y, 1.0, &c).unwrap(),
            MotionRegime::Continuous
        );
        let burst = fv(0.1, 10.0, 12.0);
        assert_eq!(
            classify_motion(&burst, &f0y, 1.0, &c).unwrap(),
            MotionRegime::PointToPoint
        );
        let soft = fv(0.03, 8.0, 5.0);
        assert_eq!(
            classify_motion(&soft, &f0y, 2.0, &c).unwrap(),
            MotionRegime::Continuous
        );
    }

    #[test]
    fn misaligned_windows_rejected() {
        let c = ThresholdConfig::default();
        let a = fv(0.1, 3.0, 3.0);
        let mut b = a.clone();
        b.start_time_us = c.max_skew_us + 1;
        assert_eq!(
            classify_motion(&a, &b, 0.0, &c),
            Err(ClassifyError::MisalignedWindows {
                skew_us: c.max_skew_us + 1
            })
        );
    }

    #[test]
    fn labels_parse_back() {
        for s in MachineState::ALL {
            assert_eq!(s.as_str().parse::<MachineState>().unwrap(), s);
        }
        for m in MotionRegime::ALL {
            assert_eq!(m.as_str().parse::<MotionRegime>().unwrap(), m);
        }
        assert!("jammed".parse::<MachineState>().is_err());
    }
}
