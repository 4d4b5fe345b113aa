//! Labelled synthetic recordings: accelerometer X/Y/Z plus one acoustic
//! channel, generated from a [`ScenarioSpec`].
//!
//! Every random draw comes from [`Xoshiro256`] substreams of the scenario
//! seed, one per generator, so each channel can be rendered independently and
//! output is bit-identical for the same spec.
//!
//! Substream ids: `10 + i` motor tone `i` phases, `2` motion profile,
//! `3 + k` state signature of segment `k`, `100` acoustic noise, `101`
//! accelerometer noise.

mod generators;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::classify::{MachineState, MotionRegime};
use crate::config::{fmt_f64, ConfigError, KvConfig};
use crate::jsonl::JsonObject;
use crate::rng::{substream_seed, Xoshiro256};
use crate::signal::{ACCEL_RATE_HZ, ACOUSTIC_RATE_HZ};

pub use generators::{
    band_noise, gen_motion_profile, gen_motor_tone, gen_state_signature, CORNER_G,
    EXTRUSION_NOISE, FLOOR_NOISE, NOISE_BAND_HZ, POINT_TO_POINT_G, ZIGZAG_G,
};
use generators::sample_count;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("tone at {freq_hz} Hz aliases (Nyquist {nyquist_hz} Hz)")]
    AliasedTone { freq_hz: f64, nyquist_hz: f64 },
    #[error("unknown scenario `{name}`; valid: {}", PRESET_NAMES.join(", "))]
    UnknownScenario { name: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// A stepper-motor tone: `orders` harmonics of `fundamental_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorTone {
    pub fundamental_hz: f64,
    pub orders: u32,
    pub rolloff_db: f64,
    pub amplitude: f64,
}

impl Default for MotorTone {
    fn default() -> Self {
        Self {
            fundamental_hz: 381.0,
            orders: 3,
            rolloff_db: 6.0,
            amplitude: 0.04,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Continuous { speed_mm_s: f64 },
    ZigZag { reversal_period_s: f64 },
    PointToPoint { move_s: f64, dwell_s: f64 },
    Idle,
}

impl Motion {
    pub fn regime(&self) -> MotionRegime {
        match self {
            Motion::Continuous { .. } => MotionRegime::Continuous,
            Motion::ZigZag { .. } => MotionRegime::ZigZag,
            Motion::PointToPoint { .. } => MotionRegime::PointToPoint,
            Motion::Idle => MotionRegime::Idle,
        }
    }
}

/// A scripted state change partway through a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub at_s: f64,
    pub state: MachineState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub duration_s: f64,
    pub seed: u64,
    pub motor_tones: Vec<MotorTone>,
    pub motion: Motion,
    pub nozzle_state: MachineState,
    pub transition: Option<Transition>,
    /// `f64::INFINITY` for a noiseless render.
    pub snr_db: f64,
    pub accel_hz: f64,
    pub acoustic_hz: f64,
    /// When false the acoustic channel carries motor tones only.
    pub extrusion: bool,
    /// Free-form print metadata, written under `meta.*`.
    pub metadata: BTreeMap<String, String>,
}

pub const PRESET_NAMES: [&str; 9] = [
    "normal-print",
    "zigzag-print",
    "point-to-point-print",
    "semi-blocked",
    "blocked",
    "runout",
    "loading",
    "y-motor",
    "normal-to-blocked",
];

fn print_metadata(state: MachineState) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    for (k, v) in [
        ("extruder_temp_c", "270"),
        ("material", "ABS-R"),
        ("layer_thickness_mm", "0.2"),
        ("nozzle_diameter_mm", "0.4"),
        ("print_type", "2 inch square"),
        ("amplifier_gain_db", "40"),
    ] {
        m.insert(k.to_string(), v.to_string());
    }
    let condition = match state {
        MachineState::Normal => "extrusion 10 mm/s, nozzle 210-220 C",
        MachineState::SemiBlocked => "extrusion 10 mm/s, nozzle 170-180 C",
        MachineState::Blocked => "extrusion 10 mm/s, nozzle 160 C",
        MachineState::Runout => "material flowing out after extrusion",
        MachineState::Loading => "filament loading before extrusion",
    };
    m.insert("condition".to_string(), condition.to_string());
    m
}

impl ScenarioSpec {
    /// A 10 s, 20 dB SNR scenario with the default motor tone.
    pub fn new(name: &str, state: MachineState, motion: Motion) -> Self {
        Self {
            name: name.to_string(),
            duration_s: 10.0,
            seed: 0,
            motor_tones: vec![MotorTone::default()],
            motion,
            nozzle_state: state,
            transition: None,
            snr_db: 20.0,
            accel_hz: ACCEL_RATE_HZ,
            acoustic_hz: ACOUSTIC_RATE_HZ,
            extrusion: true,
            metadata: print_metadata(state),
        }
    }

    pub fn preset(name: &str) -> Result<Self, SimError> {
        let continuous = Motion::Continuous {
            speed_mm_s: generators::DEFAULT_SPEED_MM_S,
        };
        let spec = match name {
            "normal-print" => Self::new(name, MachineState::Normal, continuous),
            "zigzag-print" => Self::new(
                name,
                MachineState::Normal,
                Motion::ZigZag {
                    reversal_period_s: 0.2,
                },
            ),
            "point-to-point-print" => Self::new(
                name,
                MachineState::Normal,
                Motion::PointToPoint {
                    move_s: 0.3,
                    dwell_s: 0.4,
                },
            ),
            "semi-blocked" => Self::new(name, MachineState::SemiBlocked, continuous),
            "blocked" => Self::new(name, MachineState::Blocked, continuous),
            "runout" => Self::new(name, MachineState::Runout, Motion::Idle),
            "loading" => Self::new(name, MachineState::Loading, Motion::Idle),
            "y-motor" => {
                let mut s = Self::new(name, MachineState::Normal, Motion::Idle);
                s.extrusion = false;
                s.motor_tones = vec![MotorTone {
                    amplitude: 0.3,
                    ..MotorTone::default()
                }];
                s
            }
            "normal-to-blocked" => {
                let mut s = Self::new(name, MachineState::Normal, continuous);
                s.duration_s = 20.0;
                s.transition = Some(Transition {
                    at_s: 10.0,
                    state: MachineState::Blocked,
                });
                s
            }
            _ => {
                return Err(SimError::UnknownScenario {
                    name: name.to_string(),
                })
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        for (name, r) in [("accel_hz", self.accel_hz), ("acoustic_hz", self.acoustic_hz)] {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("{name} must be positive, got {r}"));
            }
        }
        if self.snr_db.is_nan() {
            return bad("snr_db is NaN".into());
        }
        for t in &self.motor_tones {
            if !(t.amplitude >= 0.0 && t.fundamental_hz > 0.0 && t.orders >= 1) {
                return bad(format!("invalid motor tone {t:?}"));
            }
        }
        match self.motion {
            Motion::ZigZag { reversal_period_s } if !(reversal_period_s > 4.0 / self.accel_hz) => {
                return bad(format!(
                    "reversal period {reversal_period_s} s must exceed 4 samples"
                ))
            }
            Motion::PointToPoint { move_s, dwell_s }
                if !(move_s >= generators::PULSE_WIDTH_S && dwell_s >= 0.0) =>
            {
                return bad(format!("invalid point-to-point timing {move_s}/{dwell_s}"))
            }
            Motion::Continuous { speed_mm_s } if !(speed_mm_s >= 0.0) => {
                return bad(format!("invalid speed {speed_mm_s}"))
            }
            _ => {}
        }
        if let Some(t) = self.transition {
            if !(t.at_s > 0.0 && t.at_s < self.duration_s) {
                return bad(format!("transition at {} s outside the scenario", t.at_s));
            }
        }
        Ok(())
    }

    /// State segments as `(start_s, end_s, state)`.
    pub fn segments(&self) -> Vec<(f64, f64, MachineState)> {
        match self.transition {
            None => vec![(0.0, self.duration_s, self.nozzle_state)],
            Some(t) => vec![
                (0.0, t.at_s, self.nozzle_state),
                (t.at_s, self.duration_s, t.state),
            ],
        }
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("name", &self.name);
        kv.set("duration_s", fmt_f64(self.duration_s));
        kv.set("seed", self.seed);
        kv.set("state", self.nozzle_state);
        kv.set("snr_db", fmt_f64(self.snr_db));
        kv.set("accel_hz", fmt_f64(self.accel_hz));
        kv.set("acoustic_hz", fmt_f64(self.acoustic_hz));
        kv.set("extrusion", self.extrusion);
        kv.set("motion", self.motion.regime());
        match self.motion {
            Motion::Continuous { speed_mm_s } => kv.set("motion.speed_mm_s", fmt_f64(speed_mm_s)),
            Motion::ZigZag { reversal_period_s } => {
                kv.set("motion.reversal_period_s", fmt_f64(reversal_period_s))
            }
            Motion::PointToPoint { move_s, dwell_s } => {
                kv.set("motion.move_s", fmt_f64(move_s));
                kv.set("motion.dwell_s", fmt_f64(dwell_s));
            }
            Motion::Idle => {}
        }
        kv.set("motor.count", self.motor_tones.len());
        for (i, t) in self.motor_tones.iter().enumerate() {
            kv.set(&format!("motor.{i}.fundamental_hz"), fmt_f64(t.fundamental_hz));
            kv.set(&format!("motor.{i}.orders"), t.orders);
            kv.set(&format!("motor.{i}.rolloff_db"), fmt_f64(t.rolloff_db));
            kv.set(&format!("motor.{i}.amplitude"), fmt_f64(t.amplitude));
        }
        if let Some(t) = self.transition {
            kv.set("transition.at_s", fmt_f64(t.at_s));
            kv.set("transition.state", t.state);
        }
        for (k, v) in &self.metadata {
            kv.set(&format!("meta.{k}"), v);
        }
        kv
    }

    /// Reads a scenario file. Keys missing from the file keep the values of
    /// the preset named by `name` (or `normal-print`).
    pub fn from_kv(kv: &KvConfig) -> Result<Self, SimError> {
        let base = kv.get("name").unwrap_or("normal-print");
        let mut s = match Self::preset(base) {
            Ok(p) => p,
            Err(_) => {
                let mut p = Self::preset("normal-print")?;
                p.name = base.to_string();
                p
            }
        };
        s.apply_kv(kv)?;
        Ok(s)
    }

    pub fn apply_kv(&mut self, kv: &KvConfig) -> Result<(), SimError> {
        kv.check_keys(is_scenario_key)?;
        if let Some(v) = kv.get("name") {
            self.name = v.to_string();
        }
        if let Some(v) = kv.parse_opt("duration_s")? {
            self.duration_s = v;
        }
        if let Some(v) = kv.parse_opt("seed")? {
            self.seed = v;
        }
        if let Some(v) = kv.get("state") {
            self.nozzle_state = v.parse().map_err(|_| invalid(kv, "state"))?;
        }
        if let Some(v) = kv.parse_opt("snr_db")? {
            self.snr_db = v;
        }
        if let Some(v) = kv.parse_opt("accel_hz")? {
            self.accel_hz = v;
        }
        if let Some(v) = kv.parse_opt("acoustic_hz")? {
            self.acoustic_hz = v;
        }
        if let Some(v) = kv.parse_opt("extrusion")? {
            self.extrusion = v;
        }
        if let Some(m) = kv.get("motion") {
            let regime: MotionRegime = m.parse().map_err(|_| invalid(kv, "motion"))?;
            self.motion = match regime {
                MotionRegime::Continuous => Motion::Continuous {
                    speed_mm_s: generators::DEFAULT_SPEED_MM_S,
                },
                MotionRegime::ZigZag => Motion::ZigZag {
                    reversal_period_s: 0.2,
                },
                MotionRegime::PointToPoint => Motion::PointToPoint {
                    move_s: 0.3,
                    dwell_s: 0.4,
                },
                MotionRegime::Idle => Motion::Idle,
            };
        }
        match &mut self.motion {
            Motion::Continuous { speed_mm_s } => {
                if let Some(v) = kv.parse_opt("motion.speed_mm_s")? {
                    *speed_mm_s = v;
                }
            }
            Motion::ZigZag { reversal_period_s } => {
                if let Some(v) = kv.parse_opt("motion.reversal_period_s")? {
                    *reversal_period_s = v;
                }
            }
            Motion::PointToPoint { move_s, dwell_s } => {
                if let Some(v) = kv.parse_opt("motion.move_s")? {
                    *move_s = v;
                }
                if let Some(v) = kv.parse_opt("motion.dwell_s")? {
                    *dwell_s = v;
                }
            }
            Motion::Idle => {}
        }
        if let Some(count) = kv.parse_opt::<usize>("motor.count")? {
            self.motor_tones.resize(count, MotorTone::default());
        }
        for (i, t) in self.motor_tones.iter_mut().enumerate() {
            let key = |f: &str| format!("motor.{i}.{f}");
            if let Some(v) = kv.parse_opt(&key("fundamental_hz"))? {
                t.fundamental_hz = v;
            }
            if let Some(v) = kv.parse_opt(&key("orders"))? {
                t.orders = v;
            }
            if let Some(v) = kv.parse_opt(&key("rolloff_db"))? {
                t.rolloff_db = v;
            }
            if let Some(v) = kv.parse_opt(&key("amplitude"))? {
                t.amplitude = v;
            }
        }
        match (kv.parse_opt::<f64>("transition.at_s")?, kv.get("transition.state")) {
            (Some(at_s), Some(st)) => {
                self.transition = Some(Transition {
                    at_s,
                    state: st.parse().map_err(|_| invalid(kv, "transition.state"))?,
                })
            }
            (None, None) => {}
            _ => {
                return Err(SimError::InvalidSpec(
                    "transition.at_s and transition.state go together".into(),
                ))
            }
        }
        for (k, v) in kv.iter() {
            if let Some(meta) = k.strip_prefix("meta.") {
                self.metadata.insert(meta.to_string(), v.to_string());
            }
        }
        self.validate()
    }
}

fn invalid(kv: &KvConfig, key: &str) -> SimError {
    SimError::Config(ConfigError::InvalidValue {
        key: key.to_string(),
        value: kv.get(key).unwrap_or_default().to_string(),
    })
}

fn is_scenario_key(k: &str) -> bool {
    const FIXED: [&str; 16] = [
        "name",
        "duration_s",
        "seed",
        "state",
        "snr_db",
        "accel_hz",
        "acoustic_hz",
        "extrusion",
        "motion",
        "motion.speed_mm_s",
        "motion.reversal_period_s",
        "motion.move_s",
        "motion.dwell_s",
        "motor.count",
        "transition.at_s",
        "transition.state",
    ];
    if FIXED.contains(&k) || k.starts_with("meta.") {
        return true;
    }
    let parts: Vec<&str> = k.split('.').collect();
    parts.len() == 3
        && parts[0] == "motor"
        && parts[1].parse::<usize>().is_ok()
        && ["fundamental_hz", "orders", "rolloff_db", "amplitude"].contains(&parts[2])
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_kv())
    }
}

/// Ground truth for one span of a recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelSpan {
    pub start_us: i64,
    pub end_us: i64,
    pub state: MachineState,
    pub motion: MotionRegime,
}

impl LabelSpan {
    pub fn to_json(&self) -> String {
        JsonObject::new()
            .int("start_us", self.start_us)
            .int("end_us", self.end_us)
            .str("state", self.state.as_str())
            .str("motion", self.motion.as_str())
            .finish()
    }
}

/// Clean signals and injected noise kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub accel_clean: [Vec<f64>; 3],
    pub accel_noise: [Vec<f64>; 3],
    pub acoustic_clean: Vec<f64>,
    pub acoustic_noise: Vec<f64>,
    pub labels: Vec<LabelSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub spec: ScenarioSpec,
    /// X, Y, Z in g; Z carries 1 g of gravity.
    pub accel: [Vec<f64>; 3],
    pub acoustic: Vec<f64>,
    pub labels: Vec<LabelSpan>,
}

impl LabeledRecording {
    /// Ground-truth state at a time.
    pub fn state_at(&self, t_us: i64) -> Option<MachineState> {
        self.labels
            .iter()
            .find(|l| l.start_us <= t_us && t_us < l.end_us)
            .map(|l| l.state)
    }

    pub fn write_labels<W: Write>(&self, mut out: W) -> io::Result<()> {
        for l in &self.labels {
            writeln!(out, "{}", l.to_json())?;
        }
        out.flush()
    }
}

fn us(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

/// White noise with realized power exactly `power` (zero if `power` is 0 or
/// the SNR is infinite).
fn scaled_noise(rng: &mut Xoshiro256, n: usize, power: f64) -> Vec<f64> {
    if !(power > 0.0) || n == 0 {
        return vec![0.0; n];
    }
    let w = rng.normals(n);
    let p = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let k = (power / p).sqrt();
    w.into_iter().map(|v| v * k).collect()
}

fn mean_power(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64
    }
}

fn noise_power(clean_power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        clean_power / 10f64.powf(snr_db / 10.0)
    }
}

/// Renders clean signals and noise separately.
pub fn render_components(spec: &ScenarioSpec) -> Result<Components, SimError> {
    spec.validate()?;
    let seed = spec.seed;

    // Acoustic: state signature per segment plus motor tones while motors run.
    let n_ac = sample_count(spec.acoustic_hz, spec.duration_s);
    let mut acoustic = Vec::with_capacity(n_ac);
    let mut running = Vec::with_capacity(n_ac);
    let segments = spec.segments();
    for (k, &(start, end, state)) in segments.iter().enumerate() {
        let i0 = sample_count(spec.acoustic_hz, start);
        let i1 = if k + 1 == segments.len() {
            n_ac
        } else {
            sample_count(spec.acoustic_hz, end)
        };
        let len = i1 - i0;
        if spec.extrusion {
            let sig = gen_state_signature(
                state,
                spec.acoustic_hz,
                len as f64 / spec.acoustic_hz,
                substream_seed(seed, 3 + k as u64),
            )?;
            acoustic.extend(sig.into_iter().chain(std::iter::repeat(0.0)).take(len));
        } else {
            acoustic.extend(std::iter::repeat(0.0).take(len));
        }
        running.extend(std::iter::repeat(state.motors_running()).take(len));
    }
    for (i, tone) in spec.motor_tones.iter().enumerate() {
        let t = gen_motor_tone(
            tone,
            spec.acoustic_hz,
            spec.duration_s,
            substream_seed(seed, 10 + i as u64),
        )?;
        for ((a, v), on) in acoustic.iter_mut().zip(t).zip(&running) {
            if *on {
                *a += v;
            }
        }
    }
    let mut rng = Xoshiro256::substream(seed, 100);
    let acoustic_noise = scaled_noise(
        &mut rng,
        n_ac,
        noise_power(mean_power(&acoustic), spec.snr_db),
    );

    // Accelerometer: motion on X/Y, gravity on Z, one noise level for all axes.
    let (x, y) = gen_motion_profile(
        &spec.motion,
        spec.accel_hz,
        spec.duration_s,
        substream_seed(seed, 2),
    );
    let z = vec![1.0; x.len()];
    let p = noise_power((mean_power(&x) + mean_power(&y)) / 2.0, spec.snr_db);
    let mut rng = Xoshiro256::substream(seed, 101);
    let n_acc = x.len();
    let accel_noise = [
        scaled_noise(&mut rng, n_acc, p),
        scaled_noise(&mut rng, n_acc, p),
        scaled_noise(&mut rng, n_acc, p),
    ];

    let regime = spec.motion.regime();
    let labels = segments
        .iter()
        .enumerate()
        .map(|(k, &(start, end, state))| LabelSpan {
            start_us: us(start),
            end_us: if k + 1 == segments.len() {
                us(spec.duration_s)
            } else {
                us(end)
            },
            state,
            motion: regime,
        })
        .collect();

    Ok(Components {
        accel_clean: [x, y, z],
        accel_noise,
        acoustic_clean: acoustic,
        acoustic_noise,
        labels,
    })
}

pub fn render_scenario(spec: &ScenarioSpec) -> Result<LabeledRecording, SimError> {
    let c = render_components(spec)?;
    let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
    Ok(LabeledRecording {
        spec: spec.clone(),
        accel: [
            add(&c.accel_clean[0], &c.accel_noise[0]),
            add(&c.accel_clean[1], &c.accel_noise[1]),
            add(&c.accel_clean[2], &c.accel_noise[2]),
        ],
        acoustic: add(&c.acoustic_clean, &c.acoustic_noise),
        labels: c.labels,
    })
}
