//! Threshold calibration against the simulator.
//!
//! The shipped `default_thresholds.conf` is the output of
//! [`calibrate_thresholds`] with [`CalibrationPlan::default`]; a test keeps
//! the two in sync.
//!
//! For every state and every SNR level of the plan, each feature gets the
//! fence `[Q1 - k IQR, Q3 + k IQR]` over that level's windows (k = 3 by
//! default). The state interval is the hull of its per-level fences, with
//! the RMS lower bound clamped at 0. Fencing per level keeps a noisy level
//! from inflating the spread of a clean one. Motion rules are not calibrated.

use rayon::prelude::*;

use crate::classify::{MachineState, StateBounds, ThresholdConfig};
use crate::features::FeatureVector;
use crate::pipeline::{monitor_recording, MonitorConfig, PipelineError};
use crate::simulate::{render_scenario, LabeledRecording, ScenarioSpec, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no usable windows for state {0}")]
    NoWindows(MachineState),
}

/// Preset used for each state.
pub fn state_scenario(state: MachineState) -> &'static str {
    match state {
        MachineState::Normal => "normal-print",
        MachineState::SemiBlocked => "semi-blocked",
        MachineState::Blocked => "blocked",
        MachineState::Runout => "runout",
        MachineState::Loading => "loading",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPlan {
    pub seeds: Vec<u64>,
    pub snrs_db: Vec<f64>,
    pub duration_s: f64,
    pub fence: f64,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        Self {
            seeds: (1000..1020).collect(),
            snrs_db: vec![f64::INFINITY, 20.0, 10.0],
            duration_s: 10.0,
            fence: 3.0,
        }
    }
}

/// Acoustic feature vectors of the settled, non-degenerate windows lying
/// entirely inside one label span, with that label.
pub fn labeled_state_windows(
    rec: &LabeledRecording,
    cfg: &MonitorConfig,
) -> Result<Vec<(MachineState, FeatureVector, Option<MachineState>)>, PipelineError> {
    let (_, monitor) = monitor_recording(cfg, &rec.acoustic, (&[], &[]))?;
    Ok(monitor
        .state_decisions()
        .iter()
        .filter(|d| !d.transient && !d.features.degenerate)
        .filter_map(|d| {
            let a = rec.state_at(d.start_time_us)?;
            let b = rec.state_at(d.end_time_us - 1)?;
            (a == b).then(|| (a, d.features.clone(), d.state))
        })
        .collect())
}

fn quartiles(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let rank = p * (values.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        values[lo] + (values[hi] - values[lo]) * (rank - lo as f64)
    };
    (q(0.25), q(0.75))
}

fn fence(values: &mut [f64], k: f64) -> (f64, f64) {
    let (q1, q3) = quartiles(values);
    let iqr = q3 - q1;
    (q1 - k * iqr, q3 + k * iqr)
}

/// Renders every (state, seed, SNR) combination of the plan and fits the
/// state intervals. Everything except the state intervals is copied from
/// `base`.
pub fn calibrate_thresholds(
    plan: &CalibrationPlan,
    base: &MonitorConfig,
) -> Result<ThresholdConfig, CalibrationError> {
    let jobs: Vec<(MachineState, u64, f64)> = MachineState::ALL
        .iter()
        .flat_map(|&s| {
            plan.seeds
                .iter()
                .flat_map(move |&seed| plan.snrs_db.iter().map(move |&snr| (s, seed, snr)))
        })
        .collect();
    let per_job: Vec<Vec<FeatureVector>> = jobs
        .par_iter()
        .map(|&(state, seed, snr)| {
            let mut spec = ScenarioSpec::preset(state_scenario(state))?;
            spec.seed = seed;
            spec.snr_db = snr;
            spec.duration_s = plan.duration_s;
            let rec = render_scenario(&spec)?;
            Ok(labeled_state_windows(&rec, base)?
                .into_iter()
                .filter(|(label, _, _)| *label == state)
                .map(|(_, fv, _)| fv)
                .collect())
        })
        .collect::<Result<_, CalibrationError>>()?;
    let mut out = base.thresholds.clone();
    for state in MachineState::ALL {
        let mut hull: Option<[(f64, f64); 3]> = None;
        for &snr in &plan.snrs_db {
            let fvs: Vec<&FeatureVector> = jobs
                .iter()
                .zip(&per_job)
                .filter(|((s, _, n), _)| *s == state && *n == snr)
                .flat_map(|(_, v)| v)
                .collect();
            if fvs.is_empty() {
                return Err(CalibrationError::NoWindows(state));
            }
            let col = |f: fn(&FeatureVector) -> f64| -> Vec<f64> { fvs.iter().map(|v| f(v)).collect() };
            let fences = [
                fence(&mut col(|v| v.rms), plan.fence),
                fence(&mut col(|v| v.cf), plan.fence),
                fence(&mut col(|v| v.ki), plan.fence),
            ];
            hull = Some(match hull {
                None => fences,
                Some(h) => [0, 1, 2].map(|i| (h[i].0.min(fences[i].0), h[i].1.max(fences[i].1))),
            });
        }
        let [(rms_lo, rms_hi), cf, ki] = hull.ok_or(CalibrationError::NoWindows(state))?;
        out.set_state(state, StateBounds::new((rms_lo.max(0.0), rms_hi), cf, ki));
    }
    Ok(out)
}

/// The config file text for a calibrated threshold set.
pub fn render_threshold_file(cfg: &ThresholdConfig, plan: &CalibrationPlan) -> String {
    let seeds = match (plan.seeds.first(), plan.seeds.last()) {
        (Some(a), Some(b)) => format!("{a}..={b}"),
        _ => "none".to_string(),
    };
    let snrs: Vec<String> = plan.snrs_db.iter().map(|s| format!("{s}")).collect();
    format!(
        "# Generated by `printsense calibrate`. Do not edit by hand.\n\
         # seeds {seeds}, snr_db [{}], duration {} s, fence {} IQR\n{}",
        snrs.join(", "),
        plan.duration_s,
        plan.fence,
        cfg.to_kv()
    )
}
