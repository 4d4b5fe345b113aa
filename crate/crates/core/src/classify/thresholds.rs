use crate::config::{fmt_f64, ConfigError, KvConfig};
use crate::features::FeatureVector;

use super::MachineState;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ANY: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Acoustic feature intervals for one machine state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBounds {
    pub rms: Interval,
    pub cf: Interval,
    pub ki: Interval,
}

impl StateBounds {
    pub fn new(rms: (f64, f64), cf: (f64, f64), ki: (f64, f64)) -> Self {
        Self {
            rms: Interval::new(rms.0, rms.1),
            cf: Interval::new(cf.0, cf.1),
            ki: Interval::new(ki.0, ki.1),
        }
    }

    /// Fraction of `(rms, cf, ki)` inside the intervals.
    pub fn score(&self, fv: &FeatureVector) -> f64 {
        let hits = [
            self.rms.contains(fv.rms),
            self.cf.contains(fv.cf),
            self.ki.contains(fv.ki),
        ];
        hits.iter().filter(|h| **h).count() as f64 / 3.0
    }
}

impl Default for StateBounds {
    fn default() -> Self {
        Self {
            rms: Interval::ANY,
            cf: Interval::ANY,
            ki: Interval::ANY,
        }
    }
}

/// Accelerometer rules. RMS values are in g on the DC-free X/Y axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionThresholds {
    pub idle_rms_max: f64,
    pub zigzag_rms_min: f64,
    pub zigzag_reversal_min_hz: f64,
    pub p2p_rms_min: f64,
    pub p2p_cf_min: f64,
    /// Smoothed acceleration must leave `[-floor, floor]` to register a sign.
    pub reversal_floor_g: f64,
    pub smoothing_len: usize,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self {
            idle_rms_max: 0.005,
            zigzag_rms_min: 0.2,
            zigzag_reversal_min_hz: 6.0,
            p2p_rms_min: 0.06,
            p2p_cf_min: 4.0,
            reversal_floor_g: 0.05,
            smoothing_len: 5,
        }
    }
}

/// Everything the classifiers and debouncers need.
///
/// `Default` loads the shipped calibration in `data/default_thresholds.conf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    states: [StateBounds; 5],
    pub motion: MotionThresholds,
    pub hysteresis_windows: usize,
    /// Largest start-time difference tolerated between paired X/Y windows.
    pub max_skew_us: i64,
}

const SHIPPED: &str = include_str!("../../data/default_thresholds.conf");

fn index(s: MachineState) -> usize {
    MachineState::ALL.iter().position(|x| *x == s).unwrap()
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let kv = KvConfig::parse(SHIPPED).expect("shipped thresholds parse");
        let mut cfg = Self::unbounded();
        cfg.apply_kv(&kv).expect("shipped thresholds are valid");
        cfg
    }
}

const MOTION_KEYS: [&str; 7] = [
    "motion.idle.rms.max",
    "motion.zigzag.rms.min",
    "motion.zigzag.reversal_rate.min",
    "motion.point_to_point.rms.min",
    "motion.point_to_point.cf.min",
    "motion.reversal.floor_g",
    "motion.reversal.smoothing",
];

impl ThresholdConfig {
    /// Every state interval unbounded, default motion rules.
    pub fn unbounded() -> Self {
        Self {
            states: [StateBounds::default(); 5],
            motion: MotionThresholds::default(),
            hysteresis_windows: 3,
            max_skew_us: 128_000,
        }
    }

    pub fn state(&self, s: MachineState) -> &StateBounds {
        &self.states[index(s)]
    }

    pub fn set_state(&mut self, s: MachineState, bounds: StateBounds) {
        self.states[index(s)] = bounds;
    }

    /// Whether `key` is one this config reads.
    pub fn is_key(key: &str) -> bool {
        if key == "hysteresis_windows" || key == "max_skew_us" || MOTION_KEYS.contains(&key) {
            return true;
        }
        let parts: Vec<&str> = key.split('.').collect();
        parts.len() == 4
            && parts[0] == "state"
            && parts[1].parse::<MachineState>().is_ok()
            && ["rms", "cf", "ki"].contains(&parts[2])
            && ["min", "max"].contains(&parts[3])
    }

    /// Overrides the fields named in `kv`; other keys are ignored.
    pub fn apply_kv(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        for s in MachineState::ALL {
            let b = &mut self.states[index(s)];
            for (feat, iv) in [("rms", &mut b.rms), ("cf", &mut b.cf), ("ki", &mut b.ki)] {
                let base = format!("state.{}.{feat}", s.as_str());
                if let Some(v) = kv.parse_opt(&format!("{base}.min"))? {
                    iv.lo = v;
                }
                if let Some(v) = kv.parse_opt(&format!("{base}.max"))? {
                    iv.hi = v;
                }
            }
        }
        let m = &mut self.motion;
        let floats = [
            (MOTION_KEYS[0], &mut m.idle_rms_max),
            (MOTION_KEYS[1], &mut m.zigzag_rms_min),
            (MOTION_KEYS[2], &mut m.zigzag_reversal_min_hz),
            (MOTION_KEYS[3], &mut m.p2p_rms_min),
            (MOTION_KEYS[4], &mut m.p2p_cf_min),
            (MOTION_KEYS[5], &mut m.reversal_floor_g),
        ];
        for (k, field) in floats {
            if let Some(v) = kv.parse_opt(k)? {
                *field = v;
            }
        }
        if let Some(v) = kv.parse_opt(MOTION_KEYS[6])? {
            m.smoothing_len = v;
        }
        if let Some(v) = kv.parse_opt("hysteresis_windows")? {
            self.hysteresis_windows = v;
        }
        if let Some(v) = kv.parse_opt("max_skew_us")? {
            self.max_skew_us = v;
        }
        self.validate()
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_kv(kv)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for s in MachineState::ALL {
            let b = self.state(s);
            for (feat, iv) in [("rms", b.rms), ("cf", b.cf), ("ki", b.ki)] {
                if iv.lo.is_nan() || iv.hi.is_nan() || iv.lo > iv.hi {
                    return Err(ConfigError::Invalid(format!(
                        "state.{}.{feat}: min {} exceeds max {}",
                        s.as_str(),
                        iv.lo,
                        iv.hi
                    )));
                }
            }
        }
        if self.hysteresis_windows < 1 {
            return Err(ConfigError::Invalid("hysteresis_windows must be >= 1".into()));
        }
        if self.motion.smoothing_len < 1 {
            return Err(ConfigError::Invalid(
                "motion.reversal.smoothing must be >= 1".into(),
            ));
        }
        if self.max_skew_us < 0 {
            return Err(ConfigError::Invalid("max_skew_us must be >= 0".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        for s in MachineState::ALL {
            let b = self.state(s);
            for (feat, iv) in [("rms", b.rms), ("cf", b.cf), ("ki", b.ki)] {
                let base = format!("state.{}.{feat}", s.as_str());
                kv.set(&format!("{base}.min"), fmt_f64(iv.lo));
                kv.set(&format!("{base}.max"), fmt_f64(iv.hi));
            }
        }
        let m = &self.motion;
        for (k, v) in MOTION_KEYS.iter().zip([
            m.idle_rms_max,
            m.zigzag_rms_min,
            m.zigzag_reversal_min_hz,
            m.p2p_rms_min,
            m.p2p_cf_min,
            m.reversal_floor_g,
        ]) {
            kv.set(k, fmt_f64(v));
        }
        kv.set(MOTION_KEYS[6], m.smoothing_len);
        kv.set("hysteresis_windows", self.hysteresis_windows);
        kv.set("max_skew_us", self.max_skew_us);
        kv
    }

    /// Relative mode: every amplitude threshold (state and motion RMS bounds,
    /// the reversal floor) multiplied by `c`. Classifying `c * x` against
    /// `scaled(c)` gives the same labels as `x` against `self`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.states {
            b.rms = Interval::new(b.rms.lo * c, b.rms.hi * c);
        }
        let m = &mut out.motion;
        m.idle_rms_max *= c;
        m.zigzag_rms_min *= c;
        m.p2p_rms_min *= c;
        m.reversal_floor_g *= c;
        out
    }
}
