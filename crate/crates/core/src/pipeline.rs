//! The end-to-end monitor: band-pass the acoustic channel, cut both sensors
//! into windows, classify and debounce, and release events in order.
//!
//! Samples are assumed contiguous at the configured rates; the first
//! timestamp of each lane fixes its origin.

use thiserror::Error;

use crate::classify::{
    ConditionEvent, EventQueue, MotionDecision, MotionTracker, StateDecision, StateTracker,
    ThresholdConfig,
};
use crate::config::{fmt_f64, ConfigError, KvConfig};
use crate::preprocess::{design_band_pass, BandPassSpec, PreprocessError, StreamingFilter};
use crate::signal::{
    Axis, ChannelConfig, SignalError, Windower, ACCEL_RATE_HZ, ACCEL_WINDOW, ACOUSTIC_RATE_HZ,
    ACOUSTIC_WINDOW,
};
use crate::spectral::HarmonicConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Everything the monitor needs besides the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub acoustic_rate_hz: f64,
    pub accel_rate_hz: f64,
    /// (window, hop) in samples.
    pub acoustic_window: (usize, usize),
    pub accel_window: (usize, usize),
    /// `None` skips the band-pass.
    pub band_pass: Option<BandPassSpec>,
    pub thresholds: ThresholdConfig,
    pub harmonics: HarmonicConfig,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            acoustic_rate_hz: ACOUSTIC_RATE_HZ,
            accel_rate_hz: ACCEL_RATE_HZ,
            acoustic_window: ACOUSTIC_WINDOW,
            accel_window: ACCEL_WINDOW,
            band_pass: Some(BandPassSpec::default()),
            thresholds: ThresholdConfig::default(),
            harmonics: HarmonicConfig::default(),
        }
    }
}

const KEYS: [&str; 17] = [
    "acoustic.rate_hz",
    "accel.rate_hz",
    "window.acoustic.len",
    "window.acoustic.hop",
    "window.accel.len",
    "window.accel.hop",
    "filter.enabled",
    "filter.low_hz",
    "filter.high_hz",
    "filter.transition_hz",
    "filter.stopband_db",
    "harmonics.fft_len",
    "harmonics.hop",
    "harmonics.prominence_db",
    "harmonics.floor_percentile",
    "harmonics.max_order",
    "harmonics.tolerance_bins",
];

fn set_opt<T: std::str::FromStr>(kv: &KvConfig, key: &str, field: &mut T) -> Result<(), ConfigError> {
    if let Some(v) = kv.parse_opt(key)? {
        *field = v;
    }
    Ok(())
}

impl MonitorConfig {
    pub fn is_key(key: &str) -> bool {
        KEYS.contains(&key) || ThresholdConfig::is_key(key)
    }

    /// Overrides the fields named in `kv`. Unknown keys are rejected.
    pub fn apply_kv(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        kv.check_keys(Self::is_key)?;
        set_opt(kv, "acoustic.rate_hz", &mut self.acoustic_rate_hz)?;
        set_opt(kv, "accel.rate_hz", &mut self.accel_rate_hz)?;
        set_opt(kv, "window.acoustic.len", &mut self.acoustic_window.0)?;
        set_opt(kv, "window.acoustic.hop", &mut self.acoustic_window.1)?;
        set_opt(kv, "window.accel.len", &mut self.accel_window.0)?;
        set_opt(kv, "window.accel.hop", &mut self.accel_window.1)?;
        let mut enabled = self.band_pass.is_some();
        set_opt(kv, "filter.enabled", &mut enabled)?;
        let mut bp = self.band_pass.unwrap_or_default();
        set_opt(kv, "filter.low_hz", &mut bp.low_cut_hz)?;
        set_opt(kv, "filter.high_hz", &mut bp.high_cut_hz)?;
        set_opt(kv, "filter.transition_hz", &mut bp.transition_width_hz)?;
        set_opt(kv, "filter.stopband_db", &mut bp.stopband_atten_db)?;
        self.band_pass = enabled.then_some(bp);
        let h = &mut self.harmonics;
        set_opt(kv, "harmonics.fft_len", &mut h.fft_len)?;
        set_opt(kv, "harmonics.hop", &mut h.hop_len)?;
        set_opt(kv, "harmonics.prominence_db", &mut h.min_prominence_db)?;
        set_opt(kv, "harmonics.floor_percentile", &mut h.floor_percentile)?;
        set_opt(kv, "harmonics.max_order", &mut h.max_order)?;
        set_opt(kv, "harmonics.tolerance_bins", &mut h.tolerance_bins)?;
        self.thresholds.apply_kv(kv)?;
        self.validate()
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_kv(kv)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, rate) in [("acoustic", self.acoustic_rate_hz), ("accel", self.accel_rate_hz)] {
            if !(rate.is_finite() && rate > 0.0) {
                return bad(format!("{name}.rate_hz must be positive"));
            }
        }
        for (name, (len, hop)) in [("acoustic", self.acoustic_window), ("accel", self.accel_window)] {
            if len < 2 || hop == 0 || hop > len {
                return bad(format!(
                    "window.{name}: need len >= 2 and 1 <= hop <= len, got {len}/{hop}"
                ));
            }
        }
        if let Some(bp) = &self.band_pass {
            bp.validate(self.acoustic_rate_hz)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let h = &self.harmonics;
        if !h.fft_len.is_power_of_two() || h.fft_len < 4 || h.hop_len == 0 || h.max_order < 2 {
            return bad("harmonics: fft_len must be a power of two >= 4, hop >= 1, max_order >= 2".into());
        }
        self.thresholds.validate()
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = self.thresholds.to_kv();
        kv.set("acoustic.rate_hz", fmt_f64(self.acoustic_rate_hz));
        kv.set("accel.rate_hz", fmt_f64(self.accel_rate_hz));
        kv.set("window.acoustic.len", self.acoustic_window.0);
        kv.set("window.acoustic.hop", self.acoustic_window.1);
        kv.set("window.accel.len", self.accel_window.0);
        kv.set("window.accel.hop", self.accel_window.1);
        kv.set("filter.enabled", self.band_pass.is_some());
        let bp = self.band_pass.unwrap_or_default();
        kv.set("filter.low_hz", fmt_f64(bp.low_cut_hz));
        kv.set("filter.high_hz", fmt_f64(bp.high_cut_hz));
        kv.set("filter.transition_hz", fmt_f64(bp.transition_width_hz));
        kv.set("filter.stopband_db", fmt_f64(bp.stopband_atten_db));
        let h = &self.harmonics;
        kv.set("harmonics.fft_len", h.fft_len);
        kv.set("harmonics.hop", h.hop_len);
        kv.set("harmonics.prominence_db", fmt_f64(h.min_prominence_db));
        kv.set("harmonics.floor_percentile", fmt_f64(h.floor_percentile));
        kv.set("harmonics.max_order", h.max_order);
        kv.set("harmonics.tolerance_bins", fmt_f64(h.tolerance_bins));
        kv
    }
}

struct AcousticLane {
    filter: Option<StreamingFilter>,
    windower: Windower,
    tracker: StateTracker,
    window_us: i64,
}

struct AccelLane {
    x: Windower,
    y: Windower,
    tracker: MotionTracker,
    window_us: i64,
}

enum Lane<T> {
    Off,
    /// Declared but no samples seen yet; holds back every release.
    Waiting,
    Running(T),
}

impl<T> Lane<T> {
    fn declared(on: bool) -> Self {
        if on {
            Lane::Waiting
        } else {
            Lane::Off
        }
    }

    fn running(&self) -> Option<&T> {
        match self {
            Lane::Running(l) => Some(l),
            _ => None,
        }
    }
}

/// Incremental monitor over an acoustic channel and an accelerometer.
///
/// Events come out ordered by confirmation time (ties by channel id). An
/// event is released once no lane can still confirm an earlier one, so the
/// sequence does not depend on how input is chunked or interleaved.
pub struct Monitor {
    cfg: MonitorConfig,
    acoustic: Lane<AcousticLane>,
    accel: Lane<AccelLane>,
    queue: EventQueue,
}

fn window_us(len: usize, rate: f64) -> i64 {
    (len as f64 * 1e6 / rate).round() as i64
}

impl Monitor {
    /// A monitor expecting the lanes flagged true. A declared lane that never
    /// receives samples only delays release until [`Monitor::finish`].
    pub fn new(cfg: MonitorConfig, acoustic: bool, accel: bool) -> Result<Self, PipelineError> {
        cfg.validate()?;
        if let Some(bp) = &cfg.band_pass {
            design_band_pass(bp, cfg.acoustic_rate_hz)?;
        }
        Ok(Self {
            cfg,
            acoustic: Lane::declared(acoustic),
            accel: Lane::declared(accel),
            queue: EventQueue::new(),
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    /// Starts the acoustic lane with its first sample at `start_us`. Later
    /// calls are ignored.
    pub fn start_acoustic(&mut self, start_us: i64) -> Result<(), PipelineError> {
        if self.acoustic.running().is_some() {
            return Ok(());
        }
        let cfg = &self.cfg;
        let ch = ChannelConfig::acoustic(cfg.acoustic_rate_hz)?;
        let filter = match &cfg.band_pass {
            Some(bp) => Some(design_band_pass(bp, cfg.acoustic_rate_hz)?),
            None => None,
        };
        let (len, hop) = cfg.acoustic_window;
        self.acoustic = Lane::Running(AcousticLane {
            filter,
            windower: Windower::new(ch, len, hop, start_us)?,
            tracker: StateTracker::new(cfg.thresholds.clone(), cfg.harmonics),
            window_us: window_us(len, cfg.acoustic_rate_hz),
        });
        Ok(())
    }

    pub fn start_accel(&mut self, start_us: i64) -> Result<(), PipelineError> {
        if self.accel.running().is_some() {
            return Ok(());
        }
        let cfg = &self.cfg;
        let (len, hop) = cfg.accel_window;
        let x = ChannelConfig::accelerometer(Axis::X, cfg.accel_rate_hz)?;
        let y = ChannelConfig::accelerometer(Axis::Y, cfg.accel_rate_hz)?;
        self.accel = Lane::Running(AccelLane {
            x: Windower::new(x, len, hop, start_us)?,
            y: Windower::new(y, len, hop, start_us)?,
            tracker: MotionTracker::new(cfg.thresholds.clone()),
            window_us: window_us(len, cfg.accel_rate_hz),
        });
        Ok(())
    }

    /// Feeds acoustic samples; starts the lane at time 0 if needed.
    pub fn push_acoustic(&mut self, samples: &[f64]) -> Result<Vec<ConditionEvent>, PipelineError> {
        self.start_acoustic(0)?;
        let Lane::Running(lane) = &mut self.acoustic else {
            unreachable!()
        };
        let filtered;
        let input = match &mut lane.filter {
            Some(f) => {
                filtered = f.filter_stream(samples);
                &filtered[..]
            }
            None => samples,
        };
        let delay = lane.filter.as_ref().map_or(0, |f| f.group_delay() as u64);
        let hop = lane.windower.hop_len() as u64;
        for w in lane.windower.push_and_emit(input) {
            let k = lane.tracker.decisions().len() as u64;
            let transient = k * hop < delay;
            if let Some(e) = lane.tracker.push(w, transient) {
                self.queue.push(e);
            }
        }
        Ok(self.release())
    }

    /// Feeds X and Y accelerometer samples (equal lengths); starts the lane
    /// at time 0 if needed.
    pub fn push_accel(&mut self, x: &[f64], y: &[f64]) -> Result<Vec<ConditionEvent>, PipelineError> {
        assert_eq!(x.len(), y.len(), "X and Y must advance together");
        self.start_accel(0)?;
        let Lane::Running(lane) = &mut self.accel else {
            unreachable!()
        };
        let wx = lane.x.push_and_emit(x);
        let wy = lane.y.push_and_emit(y);
        for (a, b) in wx.iter().zip(&wy) {
            if let Some(e) = lane.tracker.push(a, b) {
                self.queue.push(e);
            }
        }
        Ok(self.release())
    }

    /// Earliest confirmation time any lane could still produce.
    fn watermark(&self) -> i64 {
        let lane_mark = |next: i64, dur: i64| next + dur;
        let a = match &self.acoustic {
            Lane::Off => i64::MAX,
            Lane::Waiting => i64::MIN,
            Lane::Running(l) => lane_mark(l.windower.next_window_start_us(), l.window_us),
        };
        let m = match &self.accel {
            Lane::Off => i64::MAX,
            Lane::Waiting => i64::MIN,
            Lane::Running(l) => lane_mark(l.x.next_window_start_us(), l.window_us),
        };
        a.min(m)
    }

    fn release(&mut self) -> Vec<ConditionEvent> {
        let mark = self.watermark();
        self.queue.release(mark)
    }

    /// Ends every lane and returns the events still held.
    pub fn finish(&mut self) -> Vec<ConditionEvent> {
        self.queue.drain_all()
    }

    pub fn state_decisions(&self) -> &[StateDecision] {
        self.acoustic.running().map_or(&[], |l| l.tracker.decisions())
    }

    pub fn motion_decisions(&self) -> &[MotionDecision] {
        self.accel.running().map_or(&[], |l| l.tracker.decisions())
    }
}

/// Runs a whole recording through a fresh monitor. Either input may be
/// empty, in which case that lane is not used.
pub fn monitor_recording(
    cfg: &MonitorConfig,
    acoustic: &[f64],
    accel_xy: (&[f64], &[f64]),
) -> Result<(Vec<ConditionEvent>, Monitor), PipelineError> {
    let has_accel = !accel_xy.0.is_empty();
    let mut m = Monitor::new(cfg.clone(), !acoustic.is_empty(), has_accel)?;
    let mut events = Vec::new();
    if !acoustic.is_empty() {
        events.extend(m.push_acoustic(acoustic)?);
    }
    if has_accel {
        events.extend(m.push_accel(accel_xy.0, accel_xy.1)?);
    }
    events.extend(m.finish());
    Ok((events, m))
}
