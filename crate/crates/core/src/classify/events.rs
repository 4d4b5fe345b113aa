use std::collections::VecDeque;

use crate::features::{extract_features, FeatureVector};
use crate::jsonl::{self, JsonObject};
use crate::preprocess::remove_dc;
use crate::signal::SignalWindow;
use crate::spectral::{analyze_harmonics, HarmonicConfig, HarmonicReport};

use super::{
    classify_motion, classify_state, reversal_rate_with, ClassifyError, MachineState,
    MotionRegime, ThresholdConfig,
};

/// Channel name carried by motion events (the X/Y pair).
pub const ACCEL_EVENT_CHANNEL: &str = "accel";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    StateChange,
    MotionChange,
    Anomaly,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::StateChange => "state_change",
            EventKind::MotionChange => "motion_change",
            EventKind::Anomaly => "anomaly",
        }
    }
}

/// A debounced label change or a per-window anomaly.
///
/// `t_us` estimates when the condition began: the centre of the first window
/// of the run that confirmed it. `confirmed_us` is the end of the window
/// that completed the run, the earliest moment a live monitor can know.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEvent {
    pub t_us: i64,
    pub confirmed_us: i64,
    pub channel: String,
    pub kind: EventKind,
    pub from: Option<String>,
    pub to: Option<String>,
    pub score: Option<f64>,
    /// Features of the onset window (X then Y for motion events).
    pub features: Vec<FeatureVector>,
    pub harmonics: Option<HarmonicReport>,
    pub reversal_rate_hz: Option<f64>,
    pub detail: Option<String>,
}

impl ConditionEvent {
    pub fn to_json(&self) -> String {
        let opt_str = |o: JsonObject, k: &str, v: &Option<String>| match v {
            Some(s) => o.str(k, s),
            None => o.null(k),
        };
        let mut o = JsonObject::new()
            .int("t_us", self.t_us)
            .int("confirmed_us", self.confirmed_us)
            .str("channel", &self.channel)
            .str("kind", self.kind.as_str());
        o = opt_str(o, "from", &self.from);
        o = opt_str(o, "to", &self.to);
        o = match self.score {
            Some(s) => o.float("score", s),
            None => o.null("score"),
        };
        let feats: Vec<String> = self.features.iter().map(jsonl::feature_vector).collect();
        let mut ev = JsonObject::new().raw("features", &jsonl::array(&feats));
        ev = match &self.harmonics {
            Some(h) => ev.raw("harmonics", &jsonl::harmonic_report(h)),
            None => ev.null("harmonics"),
        };
        ev = match self.reversal_rate_hz {
            Some(r) => ev.float("reversal_rate_hz", r),
            None => ev.null("reversal_rate_hz"),
        };
        o = o.raw("evidence", &ev.finish());
        o = opt_str(o, "detail", &self.detail);
        o.finish()
    }

    fn sort_key(&self) -> (i64, &str) {
        (self.confirmed_us, &self.channel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DebounceOutcome<L> {
    Unchanged,
    /// The first label held for the hysteresis length; no event.
    Established(L),
    Changed { from: L, to: L, onset: u64 },
}

/// Confirms a label once it has been seen on `hysteresis` consecutive
/// windows.
#[derive(Debug, Clone)]
pub struct Debouncer<L> {
    hysteresis: usize,
    current: Option<L>,
    /// Candidate label, run length, index of the run's first window.
    candidate: Option<(L, usize, u64)>,
}

impl<L: Copy + PartialEq> Debouncer<L> {
    pub fn new(hysteresis: usize) -> Self {
        Self {
            hysteresis: hysteresis.max(1),
            current: None,
            candidate: None,
        }
    }

    pub fn current(&self) -> Option<L> {
        self.current
    }

    pub fn push(&mut self, label: L, index: u64) -> DebounceOutcome<L> {
        if self.current == Some(label) {
            self.candidate = None;
            return DebounceOutcome::Unchanged;
        }
        let (run, onset) = match self.candidate {
            Some((l, n, onset)) if l == label => (n + 1, onset),
            _ => (1, index),
        };
        if run < self.hysteresis {
            self.candidate = Some((label, run, onset));
            return DebounceOutcome::Unchanged;
        }
        self.candidate = None;
        match self.current.replace(label) {
            None => DebounceOutcome::Established(label),
            Some(from) => DebounceOutcome::Changed {
                from,
                to: label,
                onset,
            },
        }
    }

    /// Breaks any run in progress.
    pub fn interrupt(&mut self) {
        self.candidate = None;
    }
}

fn centre_us(w: &SignalWindow) -> i64 {
    (w.start_time_us() + w.end_time_us()) / 2
}

/// Per-window outcome on the acoustic channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDecision {
    pub start_time_us: i64,
    pub end_time_us: i64,
    pub features: FeatureVector,
    /// `None` for degenerate windows.
    pub state: Option<MachineState>,
    pub score: f64,
    /// The window overlaps the band-pass warm-up.
    pub transient: bool,
}

struct Recent {
    index: u64,
    window: SignalWindow,
    features: Vec<FeatureVector>,
    score: Option<f64>,
    reversal: Option<f64>,
}

/// Debounced machine-state tracking over acoustic windows.
pub struct StateTracker {
    cfg: ThresholdConfig,
    harmonics: HarmonicConfig,
    debouncer: Debouncer<MachineState>,
    recent: VecDeque<Recent>,
    next_index: u64,
    in_degenerate_run: bool,
    decisions: Vec<StateDecision>,
}

impl StateTracker {
    pub fn new(cfg: ThresholdConfig, harmonics: HarmonicConfig) -> Self {
        Self {
            debouncer: Debouncer::new(cfg.hysteresis_windows),
            cfg,
            harmonics,
            recent: VecDeque::new(),
            next_index: 0,
            in_degenerate_run: false,
            decisions: Vec::new(),
        }
    }

    pub fn decisions(&self) -> &[StateDecision] {
        &self.decisions
    }

    pub fn current(&self) -> Option<MachineState> {
        self.debouncer.current()
    }

    pub fn push(&mut self, w: SignalWindow, transient: bool) -> Option<ConditionEvent> {
        let index = self.next_index;
        self.next_index += 1;
        let fv = extract_features(&w);
        let result = classify_state(&fv, &self.cfg);
        self.decisions.push(StateDecision {
            start_time_us: w.start_time_us(),
            end_time_us: w.end_time_us(),
            features: fv.clone(),
            state: result.as_ref().ok().map(|r| r.0),
            score: result.as_ref().map_or(0.0, |r| r.1),
            transient,
        });
        if transient {
            return None;
        }
        let (state, score) = match result {
            Ok(r) => r,
            Err(e) => {
                self.debouncer.interrupt();
                let first = !self.in_degenerate_run;
                self.in_degenerate_run = true;
                return first.then(|| ConditionEvent {
                    t_us: centre_us(&w),
                    confirmed_us: w.end_time_us(),
                    channel: w.channel().channel_id().to_string(),
                    kind: EventKind::Anomaly,
                    from: self.debouncer.current().map(|s| s.as_str().to_string()),
                    to: None,
                    score: None,
                    features: vec![fv],
                    harmonics: None,
                    reversal_rate_hz: None,
                    detail: Some(e.to_string()),
                });
            }
        };
        self.in_degenerate_run = false;
        let confirmed_us = w.end_time_us();
        remember(&mut self.recent, self.cfg.hysteresis_windows, Recent {
            index,
            window: w,
            features: vec![fv],
            score: Some(score),
            reversal: None,
        });
        match self.debouncer.push(state, index) {
            DebounceOutcome::Changed { from, to, onset } => {
                let r = self.recent.iter().find(|r| r.index == onset)?;
                let harmonics = analyze_harmonics(r.window.samples(), r.window.channel(), &self.harmonics)
                    .ok()
                    .map(|(h, _)| h);
                Some(ConditionEvent {
                    t_us: centre_us(&r.window),
                    confirmed_us,
                    channel: r.window.channel().channel_id().to_string(),
                    kind: EventKind::StateChange,
                    from: Some(from.as_str().to_string()),
                    to: Some(to.as_str().to_string()),
                    score: r.score,
                    features: r.features.clone(),
                    harmonics,
                    reversal_rate_hz: None,
                    detail: None,
                })
            }
            _ => None,
        }
    }
}

fn remember(recent: &mut VecDeque<Recent>, keep: usize, r: Recent) {
    recent.push_back(r);
    while recent.len() > keep.max(1) {
        recent.pop_front();
    }
}

/// Per-window outcome on the accelerometer X/Y pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionDecision {
    pub start_time_us: i64,
    pub end_time_us: i64,
    pub fx: FeatureVector,
    pub fy: FeatureVector,
    pub reversal_rate_hz: f64,
    pub regime: Result<MotionRegime, ClassifyError>,
}

/// Debounced motion-regime tracking over paired X/Y windows.
pub struct MotionTracker {
    cfg: ThresholdConfig,
    debouncer: Debouncer<MotionRegime>,
    recent: VecDeque<Recent>,
    next_index: u64,
    decisions: Vec<MotionDecision>,
}

impl MotionTracker {
    pub fn new(cfg: ThresholdConfig) -> Self {
        Self {
            debouncer: Debouncer::new(cfg.hysteresis_windows),
            cfg,
            recent: VecDeque::new(),
            next_index: 0,
            decisions: Vec::new(),
        }
    }

    pub fn decisions(&self) -> &[MotionDecision] {
        &self.decisions
    }

    pub fn current(&self) -> Option<MotionRegime> {
        self.debouncer.current()
    }

    pub fn push(&mut self, wx: &SignalWindow, wy: &SignalWindow) -> Option<ConditionEvent> {
        let index = self.next_index;
        self.next_index += 1;
        let (cx, cy) = (remove_dc(wx), remove_dc(wy));
        let (fx, fy) = (extract_features(&cx), extract_features(&cy));
        let m = &self.cfg.motion;
        let rate = reversal_rate_with(&cx, &cy, m.reversal_floor_g, m.smoothing_len);
        let regime = classify_motion(&fx, &fy, rate, &self.cfg);
        self.decisions.push(MotionDecision {
            start_time_us: wx.start_time_us(),
            end_time_us: wx.end_time_us(),
            fx: fx.clone(),
            fy: fy.clone(),
            reversal_rate_hz: rate,
            regime: regime.clone(),
        });
        let regime = match regime {
            Ok(r) => r,
            Err(e) => {
                self.debouncer.interrupt();
                return Some(ConditionEvent {
                    t_us: centre_us(wx),
                    confirmed_us: wx.end_time_us().max(wy.end_time_us()),
                    channel: ACCEL_EVENT_CHANNEL.to_string(),
                    kind: EventKind::Anomaly,
                    from: self.debouncer.current().map(|s| s.as_str().to_string()),
                    to: None,
                    score: None,
                    features: vec![fx, fy],
                    harmonics: None,
                    reversal_rate_hz: Some(rate),
                    detail: Some(e.to_string()),
                });
            }
        };
        remember(&mut self.recent, self.cfg.hysteresis_windows, Recent {
            index,
            window: wx.clone(),
            features: vec![fx, fy],
            score: None,
            reversal: Some(rate),
        });
        match self.debouncer.push(regime, index) {
            DebounceOutcome::Changed { from, to, onset } => {
                let r = self.recent.iter().find(|r| r.index == onset)?;
                Some(ConditionEvent {
                    t_us: centre_us(&r.window),
                    confirmed_us: wx.end_time_us(),
                    channel: ACCEL_EVENT_CHANNEL.to_string(),
                    kind: EventKind::MotionChange,
                    from: Some(from.as_str().to_string()),
                    to: Some(to.as_str().to_string()),
                    score: None,
                    features: r.features.clone(),
                    harmonics: None,
                    reversal_rate_hz: r.reversal,
                    detail: None,
                })
            }
            _ => None,
        }
    }
}

/// Holds events until no channel can still produce an earlier one.
///
/// Events are ordered by confirmation time, ties broken by channel id.
#[derive(Debug, Default)]
pub struct EventQueue {
    pending: Vec<ConditionEvent>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: ConditionEvent) {
        self.pending.push(e);
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Releases every event confirmed strictly before `watermark_us`, in
    /// order.
    pub fn release(&mut self, watermark_us: i64) -> Vec<ConditionEvent> {
        self.pending.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let n = self
            .pending
            .iter()
            .take_while(|e| e.confirmed_us < watermark_us)
            .count();
        self.pending.drain(..n).collect()
    }

    pub fn drain_all(&mut self) -> Vec<ConditionEvent> {
        self.release(i64::MAX)
    }
}

/// Batch monitoring over already-cut windows: acoustic windows for machine
/// state, X/Y window pairs for motion.
pub fn run_monitor(
    acoustic: &[SignalWindow],
    accel: &[(SignalWindow, SignalWindow)],
    cfg: &ThresholdConfig,
) -> Vec<ConditionEvent> {
    let mut queue = EventQueue::new();
    let mut states = StateTracker::new(cfg.clone(), HarmonicConfig::default());
    for w in acoustic {
        if let Some(e) = states.push(w.clone(), false) {
            queue.push(e);
        }
    }
    let mut motion = MotionTracker::new(cfg.clone());
    for (x, y) in accel {
        if let Some(e) = motion.push(x, y) {
            queue.push(e);
        }
    }
    queue.drain_all()
}
