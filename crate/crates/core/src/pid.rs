//! Discrete PID flow controller and Ziegler-Nichols closed-loop tuning.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PidError {
    #[error("no sustained oscillation found for gains up to {max_gain}")]
    NoOscillation { max_gain: f64 },
    #[error("invalid {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Ultimate point of a proportional-only loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZnUltimate {
    /// Ultimate proportional gain.
    pub g: f64,
    /// Oscillation period at that gain, s.
    pub p: f64,
}

impl ZnUltimate {
    pub fn new(g: f64, p: f64) -> Result<Self, PidError> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(PidError::InvalidParam { name: "ultimate gain", value: g });
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(PidError::InvalidParam { name: "ultimate period", value: p });
        }
        Ok(Self { g, p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    /// 1/s
    pub ki: f64,
    /// s
    pub kd: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), PidError> {
        for (name, value) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(PidError::InvalidParam { name, value });
            }
        }
        Ok(())
    }
}

impl Default for PidGains {
    /// Ziegler-Nichols PID gains for the flow loop's ultimate point
    /// (G = 18, P = 33 s).
    fn default() -> Self {
        zn_tune(ZnUltimate { g: 18.0, p: 33.0 }, ControllerType::Pid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ControllerType {
    P,
    Pi,
    Pid,
}

/// Closed-loop Ziegler-Nichols table.
pub fn zn_tune(u: ZnUltimate, kind: ControllerType) -> PidGains {
    match kind {
        ControllerType::P => PidGains { kp: 0.5 * u.g, ki: 0.0, kd: 0.0 },
        ControllerType::Pi => {
            let kp = 0.45 * u.g;
            PidGains { kp, ki: 1.2 * kp / u.p, kd: 0.0 }
        }
        ControllerType::Pid => {
            let kp = 0.6 * u.g;
            PidGains { kp, ki: 2.0 * kp / u.p, kd: kp * u.p / 8.0 }
        }
    }
}

/// Controller memory plus output limits. Positional form: derivative acts
/// on the filtered measurement, the integrator is frozen while the output is
/// saturated in the direction the error is pushing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_meas: Option<f64>,
    pub out_lo: f64,
    pub out_hi: f64,
    pub d_filter_tau: f64,
    pub d_state: f64,
}

impl PidState {
    pub fn new(out_lo: f64, out_hi: f64, d_filter_tau: f64) -> Result<Self, PidError> {
        if !(out_lo < out_hi) {
            return Err(PidError::InvalidParam { name: "out_hi - out_lo", value: out_hi - out_lo });
        }
        if !(d_filter_tau >= 0.0) {
            return Err(PidError::InvalidParam { name: "d_filter_tau", value: d_filter_tau });
        }
        Ok(Self { integral: 0.0, prev_meas: None, out_lo, out_hi, d_filter_tau, d_state: 0.0 })
    }

    /// Preloads the integrator so that, at zero error, the controller emits
    /// `output` (bumpless start from a known operating point).
    pub fn with_output(mut self, gains: &PidGains, output: f64, measurement: f64) -> Self {
        if gains.ki > 0.0 {
            self.integral = self.clamp_integral(gains, output / gains.ki);
        }
        self.prev_meas = Some(measurement);
        self
    }

    fn clamp_integral(&self, gains: &PidGains, integral: f64) -> f64 {
        if gains.ki > 0.0 {
            integral.clamp(self.out_lo / gains.ki, self.out_hi / gains.ki)
        } else {
            integral
        }
    }
}

pub fn pid_update(s: &PidState, gains: &PidGains, setpoint: f64, measurement: f64, dt: f64) -> (f64, PidState) {
    debug_assert!(dt > 0.0);
    let e = setpoint - measurement;
    let raw_d = match s.prev_meas {
        Some(prev) => -(measurement - prev) / dt,
        None => 0.0,
    };
    let d_state =
        if s.d_filter_tau > 0.0 { s.d_state + dt / (s.d_filter_tau + dt) * (raw_d - s.d_state) } else { raw_d };
    let unsat = gains.kp * e + gains.ki * s.integral + gains.kd * d_state;
    let output = unsat.clamp(s.out_lo, s.out_hi);

    let deepens = (unsat > s.out_hi && e > 0.0) || (unsat < s.out_lo && e < 0.0);
    let integral = if deepens { s.integral } else { s.clamp_integral(gains, s.integral + e * dt) };

    (output, PidState { integral, prev_meas: Some(measurement), d_state, ..*s })
}

/// Envelope behaviour of a proportional-only closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Decaying,
    Sustained,
    Growing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub trend: Trend,
    pub period: Option<f64>,
}

/// Runs a P-only loop at the given gain and reports what it saw.
pub trait OscillationProbe {
    fn probe(&mut self, gain: f64) -> ProbeOutcome;
}

impl<F: FnMut(f64) -> ProbeOutcome> OscillationProbe for F {
    fn probe(&mut self, gain: f64) -> ProbeOutcome {
        self(gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UltimateSearch {
    pub start_gain: f64,
    pub max_gain: f64,
    /// Multiplier used while bracketing.
    pub growth: f64,
    /// Relative bracket width at which bisection stops.
    pub resolution: f64,
}

impl Default for UltimateSearch {
    fn default() -> Self {
        Self { start_gain: 0.1, max_gain: 1e4, growth: 2.0, resolution: 0.05 }
    }
}

/// Raises the proportional gain until the loop stops decaying, then bisects
/// the bracket down to `resolution`.
pub fn find_ultimate(probe: &mut impl OscillationProbe, search: &UltimateSearch) -> Result<ZnUltimate, PidError> {
    let mut lo = 0.0;
    let mut g = search.start_gain;
    let mut hi_outcome = loop {
        if g > search.max_gain {
            return Err(PidError::NoOscillation { max_gain: search.max_gain });
        }
        let out = probe.probe(g);
        if out.trend != Trend::Decaying {
            break out;
        }
        lo = g;
        g *= search.growth;
    };
    let mut hi = g;
    while (hi - lo) > search.resolution * hi {
        let mid = 0.5 * (lo + hi);
        let out = probe.probe(mid);
        if out.trend == Trend::Decaying {
            lo = mid;
        } else {
            hi = mid;
            hi_outcome = out;
        }
    }
    let period = hi_outcome.period.ok_or(PidError::NoOscillation { max_gain: hi })?;
    ZnUltimate::new(hi, period)
}

/// Classifies a sampled response by the ratio of successive peak-to-trough
/// swings over its last few half-cycles.
pub fn classify_oscillation(y: &[f64], dt: f64) -> ProbeOutcome {
    let mut extrema: Vec<(usize, f64)> = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        if (b > a && b >= c) || (b < a && b <= c) {
            extrema.push((i, b));
        }
    }
    let swings: Vec<f64> = extrema.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if swings.len() < 4 || swings.iter().all(|s| *s < 1e-9 * scale) {
        return ProbeOutcome { trend: Trend::Decaying, period: None };
    }
    // A response that has died down to round-off is decaying, whatever the
    // ratio of its noise-level swings says.
    let biggest = swings.iter().fold(0.0f64, |m, s| m.max(*s));
    if swings[swings.len() - 1] < 1e-6 * biggest {
        return ProbeOutcome { trend: Trend::Decaying, period: None };
    }
    let tail = &swings[swings.len().saturating_sub(8)..];
    let first = tail[0].max(1e-300);
    let last = tail[tail.len() - 1];
    let ratio = (last / first).powf(1.0 / (tail.len() - 1) as f64);
    let trend = if ratio > 1.01 {
        Trend::Growing
    } else if ratio < 0.99 {
        Trend::Decaying
    } else {
        Trend::Sustained
    };
    let maxima: Vec<usize> = extrema.windows(2).filter(|w| w[0].1 > w[1].1).map(|w| w[0].0).collect();
    let period = if maxima.len() >= 2 {
        let take = &maxima[maxima.len().saturating_sub(5)..];
        Some((take[take.len() - 1] - take[0]) as f64 * dt / (take.len() - 1) as f64)
    } else {
        None
    };
    ProbeOutcome { trend, period }
}

/// First-order lag with dead time: `τ·dy/dt = −y + K·u(t − L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fopdt {
    pub gain: f64,
    pub tau: f64,
    pub delay: f64,
}

impl Fopdt {
    /// Process whose continuous-time ultimate point is `u`, for a given lag.
    pub fn with_ultimate(u: ZnUltimate, tau: f64) -> Self {
        let w = 2.0 * PI / u.p;
        let delay = (PI - (w * tau).atan()) / w;
        let gain = (1.0 + (w * tau).powi(2)).sqrt() / u.g;
        Self { gain, tau, delay }
    }
}

/// Simulates a unit setpoint step on a P-only loop around a [`Fopdt`]
/// process using the exact zero-order-hold discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FopdtProbe {
    pub process: Fopdt,
    pub dt: f64,
    pub horizon: f64,
}

impl OscillationProbe for FopdtProbe {
    fn probe(&mut self, gain: f64) -> ProbeOutcome {
        let Fopdt { gain: k, tau, delay } = self.process;
        let n = (self.horizon / self.dt).ceil() as usize;
        let lag = (delay / self.dt).round() as usize;
        let a = (-self.dt / tau).exp();
        let mut pending: VecDeque<f64> = std::iter::repeat_n(0.0, lag).collect();
        let mut y = 0.0;
        let mut trace = Vec::with_capacity(n);
        for _ in 0..n {
            pending.push_back(gain * (1.0 - y));
            let u = pending.pop_front().unwrap_or(0.0);
            y = a * y + (1.0 - a) * k * u;
            if !y.is_finite() || y.abs() > 1e12 {
                return ProbeOutcome { trend: Trend::Growing, period: classify_oscillation(&trace, self.dt).period };
            }
            trace.push(y);
        }
        classify_oscillation(&trace, self.dt)
    }
}
