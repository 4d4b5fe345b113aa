//! Signal generators. All amplitudes are synthetic: chosen so that the
//! labelled conditions are separable, not measured on a printer.

use std::f64::consts::PI;

use crate::classify::MachineState;
use crate::preprocess::{design_band_pass, BandPassSpec};
use crate::rng::Xoshiro256;

use super::{Motion, MotorTone, SimError};

/// Standard deviation of the band-shaped extrusion noise in the Normal state.
pub const EXTRUSION_NOISE: f64 = 0.15;
/// Broadband floor when nothing is extruded, 30 dB under `EXTRUSION_NOISE`.
pub const FLOOR_NOISE: f64 = 0.004_743_416_490_252_569;
/// Level at which runout starts, 6 dB under `EXTRUSION_NOISE`.
pub const RUNOUT_START: f64 = 0.075;
/// Extrusion noise is shaped into this band (Hz).
pub const NOISE_BAND_HZ: (f64, f64) = (100.0, 1000.0);

pub const SPUTTER_CYCLE_S: f64 = 0.04;
pub const SPUTTER_DROPOUT: (f64, f64) = (0.3, 0.7);
pub const SPUTTER_RESIDUAL: f64 = 0.1;

pub const CLICK_PERIOD_S: f64 = 0.1;
pub const CLICK_JITTER_S: f64 = 0.02;
pub const CLICK_FREQ_HZ: f64 = 1500.0;
pub const CLICK_TAU_S: f64 = 0.0015;
pub const CLICK_AMPLITUDE: (f64, f64) = (0.3, 0.5);

/// Half-sine acceleration pulse width.
pub const PULSE_WIDTH_S: f64 = 0.02;
pub const ZIGZAG_G: f64 = 1.0;
pub const POINT_TO_POINT_G: f64 = 0.6;
pub const CORNER_G: f64 = 0.2;
pub const CORNER_RATE_HZ: f64 = 1.5;
pub const CORNER_MIN_GAP_S: f64 = 0.4;
/// Drive ripple on the dominant axis while moving.
pub const RIPPLE_G: f64 = 0.02;
pub const DEFAULT_SPEED_MM_S: f64 = 50.0;
/// Fraction of the X acceleration coupled into Y.
pub const CROSS_COUPLING: f64 = 0.15;

pub(crate) fn sample_count(rate_hz: f64, duration_s: f64) -> usize {
    (rate_hz * duration_s).floor() as usize
}

/// Sum of harmonics `k * f` (k = 1..orders) with seeded random phases and
/// amplitudes falling `rolloff_db` per order.
pub fn gen_motor_tone(
    tone: &MotorTone,
    rate_hz: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    let nyquist = rate_hz / 2.0;
    let top = tone.fundamental_hz * tone.orders as f64;
    if top >= nyquist {
        return Err(SimError::AliasedTone {
            freq_hz: top,
            nyquist_hz: nyquist,
        });
    }
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let partials: Vec<(f64, f64, f64)> = (1..=tone.orders)
        .map(|k| {
            let amp = tone.amplitude * 10f64.powf(-tone.rolloff_db * (k - 1) as f64 / 20.0);
            let phase = 2.0 * PI * rng.uniform();
            (2.0 * PI * k as f64 * tone.fundamental_hz / rate_hz, amp, phase)
        })
        .collect();
    Ok((0..sample_count(rate_hz, duration_s))
        .map(|i| {
            partials
                .iter()
                .map(|(w, a, p)| a * (w * i as f64 + p).sin())
                .sum()
        })
        .collect())
}

fn add_pulse(xs: &mut [f64], rate_hz: f64, t_s: f64, amp: f64) {
    let m = (PULSE_WIDTH_S * rate_hz).round().max(1.0) as usize;
    let i0 = (t_s * rate_hz).round() as usize;
    for j in 0..m {
        if let Some(x) = xs.get_mut(i0 + j) {
            *x += amp * (PI * (j as f64 + 0.5) / m as f64).sin();
        }
    }
}

/// X/Y acceleration in g for a motion regime, before noise and gravity.
pub fn gen_motion_profile(
    motion: &Motion,
    rate_hz: f64,
    duration_s: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = sample_count(rate_hz, duration_s);
    let mut x = vec![0.0; n];
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let ripple_hz = match motion {
        Motion::Idle => return (x.clone(), x),
        Motion::Continuous { speed_mm_s } => speed_mm_s / 2.0,
        _ => DEFAULT_SPEED_MM_S / 2.0,
    };
    match *motion {
        Motion::ZigZag { reversal_period_s } => {
            let half = reversal_period_s / 2.0;
            let mut j = 0u64;
            while (j as f64) * half + PULSE_WIDTH_S <= duration_s {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                add_pulse(&mut x, rate_hz, j as f64 * half, sign * ZIGZAG_G);
                j += 1;
            }
        }
        Motion::PointToPoint { move_s, dwell_s } => {
            let mut c = 0u64;
            loop {
                let start = c as f64 * (move_s + dwell_s);
                let stop = start + move_s - PULSE_WIDTH_S;
                if stop + PULSE_WIDTH_S > duration_s {
                    break;
                }
                let dir = if c % 2 == 0 { 1.0 } else { -1.0 };
                add_pulse(&mut x, rate_hz, start, dir * POINT_TO_POINT_G);
                add_pulse(&mut x, rate_hz, stop.max(start), -dir * POINT_TO_POINT_G);
                c += 1;
            }
        }
        Motion::Continuous { .. } => {
            let mut t = 0.0;
            loop {
                t += rng.exponential(1.0 / CORNER_RATE_HZ).max(CORNER_MIN_GAP_S);
                if t + PULSE_WIDTH_S > duration_s {
                    break;
                }
                let sign = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
                add_pulse(&mut x, rate_hz, t, sign * CORNER_G);
            }
        }
        Motion::Idle => unreachable!(),
    }
    let phase = 2.0 * PI * rng.uniform();
    let w = 2.0 * PI * ripple_hz / rate_hz;
    let mut y = Vec::with_capacity(n);
    for (i, xi) in x.iter_mut().enumerate() {
        let r = (w * i as f64 + phase).sin();
        y.push(CROSS_COUPLING * *xi + 0.5 * RIPPLE_G * (w * i as f64 + phase + PI / 2.0).sin());
        *xi += RIPPLE_G * r;
    }
    (x, y)
}

/// Unit-variance Gaussian noise shaped into `NOISE_BAND_HZ`.
pub fn band_noise(rng: &mut Xoshiro256, n: usize, rate_hz: f64) -> Result<Vec<f64>, SimError> {
    let spec = BandPassSpec {
        low_cut_hz: NOISE_BAND_HZ.0,
        high_cut_hz: NOISE_BAND_HZ.1,
        ..BandPassSpec::default()
    };
    let filter = design_band_pass(&spec, rate_hz)
        .map_err(|e| SimError::InvalidSpec(format!("noise shaping at {rate_hz} Hz: {e}")))?;
    let taps = filter.taps();
    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    let l = taps.len();
    let white = rng.normals(n + l - 1);
    Ok((0..n)
        .map(|i| {
            // Output i sees a full history, so no warm-up is kept.
            let seg = &white[i..i + l];
            seg.iter().rev().zip(taps).map(|(x, h)| x * h).sum::<f64>() / norm
        })
        .collect())
}

/// Acoustic signature of a nozzle state, without motor tones.
pub fn gen_state_signature(
    state: MachineState,
    rate_hz: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    let n = sample_count(rate_hz, duration_s);
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let noise = band_noise(&mut rng, n, rate_hz)?;
    let out = match state {
        MachineState::Normal => noise.iter().map(|v| EXTRUSION_NOISE * v).collect(),
        MachineState::Blocked => noise.iter().map(|v| FLOOR_NOISE * v).collect(),
        MachineState::SemiBlocked => {
            let cycle = (SPUTTER_CYCLE_S * rate_hz).round().max(1.0) as usize;
            let mut env = Vec::with_capacity(n + cycle);
            while env.len() < n {
                let d = rng.uniform_range(SPUTTER_DROPOUT.0, SPUTTER_DROPOUT.1);
                let on = ((1.0 - d) * cycle as f64).round() as usize;
                env.extend(std::iter::repeat(1.0).take(on));
                env.extend(std::iter::repeat(SPUTTER_RESIDUAL).take(cycle - on));
            }
            noise
                .iter()
                .zip(&env)
                .map(|(v, e)| EXTRUSION_NOISE * e * v)
                .collect()
        }
        MachineState::Runout => {
            let tau = duration_s / (RUNOUT_START / FLOOR_NOISE).ln();
            noise
                .iter()
                .enumerate()
                .map(|(i, v)| RUNOUT_START * (-(i as f64 / rate_hz) / tau).exp() * v)
                .collect()
        }
        MachineState::Loading => {
            let mut xs: Vec<f64> = noise.iter().map(|v| FLOOR_NOISE * v).collect();
            let f = CLICK_FREQ_HZ.min(0.3 * rate_hz);
            let len = (10.0 * CLICK_TAU_S * rate_hz).ceil() as usize;
            let mut t = rng.uniform() * CLICK_PERIOD_S;
            while t < duration_s {
                let amp = rng.uniform_range(CLICK_AMPLITUDE.0, CLICK_AMPLITUDE.1);
                let i0 = (t * rate_hz).round() as usize;
                for j in 0..len {
                    let Some(x) = xs.get_mut(i0 + j) else { break };
                    let tj = j as f64 / rate_hz;
                    *x += amp * (-tj / CLICK_TAU_S).exp() * (2.0 * PI * f * tj).sin();
                }
                t += CLICK_PERIOD_S + rng.uniform_range(-CLICK_JITTER_S, CLICK_JITTER_S);
            }
            xs
        }
    };
    Ok(out)
}
