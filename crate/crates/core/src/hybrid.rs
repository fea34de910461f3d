//! Cascade controller: a fuzzy pH supervisor sets the acid/base flow split,
//! and one PID per stream drives its valve onto that split.
//!
//! The supervisor output `delta` is interpreted by an [`OuterLaw`]. The
//! default law integrates `delta` into a target feed pH and inverts the feed
//! titration curve to get the split, which keeps the loop gain roughly
//! constant across the steep part of the curve. [`OuterLaw::Split`]
//! integrates `delta` straight into the split fraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemistry::{reachable_ph, split_for_ph, ChemistryError};
use crate::fuzzy::FuzzyController;
use crate::pid::{pid_update, PidError, PidGains, PidState};
use crate::plant::{PlantParams, SensorReadings, ValveModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error("invalid cascade parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
    #[error(transparent)]
    Pid(#[from] PidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Hybrid,
    FuzzyOnly,
}

/// How the supervisor output moves the flow split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterLaw {
    /// `r += delta/100 · rate · period`, clamped to [0, 1].
    Split { rate: f64 },
    /// Integrates a target feed pH `u += delta/100 · rate · period` (pH/s
    /// at full output), held within `window` pH of the setpoint, then sets
    /// the split whose feed mixture has pH `u + kpos · delta/100`.
    FeedPh { rate: f64, kpos: f64, window: f64 },
}

impl Default for OuterLaw {
    fn default() -> Self {
        Self::FeedPh { rate: 0.07, kpos: 3.8, window: 1.1 }
    }
}

impl OuterLaw {
    pub const LITERAL_SPLIT_RATE: f64 = 0.02;

    fn validate(&self) -> Result<(), HybridError> {
        let checks: &[(&'static str, f64)] = match self {
            Self::Split { rate } => &[("rate", *rate)],
            Self::FeedPh { rate, kpos, window } => &[("rate", *rate), ("kpos", *kpos), ("window", *window)],
        };
        for &(name, value) in checks {
            if !(value.is_finite() && value >= 0.0) {
                return Err(HybridError::InvalidParam { name, value });
            }
        }
        if let Self::FeedPh { window, .. } = self {
            if *window <= 0.0 {
                return Err(HybridError::InvalidParam { name: "window", value: *window });
            }
        }
        Ok(())
    }
}

/// One gain set per stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamGains {
    pub acid: PidGains,
    pub base: PidGains,
}

/// PID gains act on flows expressed as a fraction of `f_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// Supervisor update interval, s.
    pub fuzzy_period: f64,
    /// Total feed flow shared by the two streams, L/s.
    pub f_total: f64,
    pub gains: StreamGains,
    pub controller_kind: ControllerKind,
    #[serde(default)]
    pub outer_law: OuterLaw,
    /// Derivative filter time constant of the flow PIDs, s.
    #[serde(default = "default_d_filter_tau")]
    pub d_filter_tau: f64,
}

fn default_d_filter_tau() -> f64 {
    1.0
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            fuzzy_period: 1.0,
            f_total: 0.05,
            gains: StreamGains::default(),
            controller_kind: ControllerKind::Hybrid,
            outer_law: OuterLaw::default(),
            d_filter_tau: default_d_filter_tau(),
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self, plant: &PlantParams, dt: f64) -> Result<(), HybridError> {
        if !(self.fuzzy_period >= dt) || !self.fuzzy_period.is_finite() {
            return Err(HybridError::InvalidParam { name: "fuzzy_period", value: self.fuzzy_period });
        }
        if !(self.f_total > 0.0 && self.f_total <= 2.0 * plant.f_max) {
            return Err(HybridError::InvalidParam { name: "f_total", value: self.f_total });
        }
        if !(self.d_filter_tau >= 0.0) {
            return Err(HybridError::InvalidParam { name: "d_filter_tau", value: self.d_filter_tau });
        }
        self.gains.acid.validate()?;
        self.gains.base.validate()?;
        self.outer_law.validate()
    }
}

/// Split update of the literal incremental law.
pub fn split_from_delta(r: f64, delta: f64, fuzzy_period: f64, rate: f64) -> f64 {
    (r + delta / 100.0 * rate * fuzzy_period).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commands {
    pub f1_cmd: f64,
    pub f2_cmd: f64,
    /// Supervisor output in force this step.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    pub fuzzy: FuzzyController,
    pub pid_acid: PidState,
    pub pid_base: PidState,
    /// Base share of the total flow.
    pub split: f64,
    /// Integrated target feed pH (feed-pH law only).
    pub feed_ph: f64,
    pub delta: f64,
    pub last_fuzzy_t: Option<f64>,
    reach: (f64, f64),
}

impl ControllerState {
    /// Controller at rest at `initial_ph`: the split already mixes feed of
    /// that pH, and each PID's integrator holds the valve on the flow the
    /// split asks for.
    pub fn at_equilibrium(
        fuzzy: FuzzyController,
        cfg: &CascadeConfig,
        plant: &PlantParams,
        valves: (&ValveModel, &ValveModel),
        initial_ph: f64,
    ) -> Result<Self, HybridError> {
        let split = split_for_ph(initial_ph, plant.c1, plant.c2, plant.constants)?;
        let reach = reachable_ph(plant.c1, plant.c2, plant.constants)?;
        let (f1, f2) = setpoints(split, cfg.f_total);
        // Opening-branch command whose settled flow is exactly `f`, so the
        // valves start at rest on their hysteresis characteristic.
        let hold = |f: f64, v: &ValveModel| (f / (1.0 - v.hysteresis_eps) / plant.f_max).min(1.0);
        let pid = |gains: &PidGains, f: f64, v: &ValveModel| -> Result<PidState, HybridError> {
            Ok(PidState::new(0.0, 1.0, cfg.d_filter_tau)?.with_output(gains, hold(f, v), f / plant.f_max))
        };
        Ok(Self {
            fuzzy,
            pid_acid: pid(&cfg.gains.acid, f1, valves.0)?,
            pid_base: pid(&cfg.gains.base, f2, valves.1)?,
            split,
            feed_ph: initial_ph,
            delta: 0.0,
            last_fuzzy_t: None,
            reach,
        })
    }

    /// Flow setpoints `(F1, F2)` implied by the current split.
    pub fn flow_setpoints(&self, cfg: &CascadeConfig) -> (f64, f64) {
        setpoints(self.split, cfg.f_total)
    }

    /// Runs the supervisor when its period has elapsed.
    fn supervise(
        &mut self,
        cfg: &CascadeConfig,
        plant: &PlantParams,
        t: f64,
        ph_setpoint: f64,
        ph: f64,
        dt: f64,
    ) -> Result<(), HybridError> {
        let due = match self.last_fuzzy_t {
            None => true,
            Some(last) => t - last >= cfg.fuzzy_period - 0.5 * dt,
        };
        if !due {
            return Ok(());
        }
        self.last_fuzzy_t = Some(t);
        let delta = self.fuzzy.controller_output(ph_setpoint - ph);
        self.delta = delta;
        match cfg.outer_law {
            OuterLaw::Split { rate } => {
                self.split = split_from_delta(self.split, delta, cfg.fuzzy_period, rate);
            }
            OuterLaw::FeedPh { rate, kpos, window } => {
                let (lo, hi) = self.reach;
                let u = self.feed_ph + delta / 100.0 * rate * cfg.fuzzy_period;
                self.feed_ph = u.max(ph_setpoint - window).min(ph_setpoint + window).clamp(lo, hi);
                let target = (self.feed_ph + kpos * delta / 100.0).clamp(lo, hi);
                self.split = split_for_ph(target, plant.c1, plant.c2, plant.constants)?;
            }
        }
        Ok(())
    }

    /// One cascade step at time `t`: supervisor (when due), then a PID
    /// update per stream. Commands are valve positions in L/s.
    pub fn control_step(
        &mut self,
        cfg: &CascadeConfig,
        plant: &PlantParams,
        t: f64,
        ph_setpoint: f64,
        readings: &SensorReadings,
        dt: f64,
    ) -> Result<Commands, HybridError> {
        self.supervise(cfg, plant, t, ph_setpoint, readings.ph, dt)?;
        let (s1, s2) = self.flow_setpoints(cfg);
        let fm = plant.f_max;
        let (u1, a) = pid_update(&self.pid_acid, &cfg.gains.acid, s1 / fm, readings.f1 / fm, dt);
        let (u2, b) = pid_update(&self.pid_base, &cfg.gains.base, s2 / fm, readings.f2 / fm, dt);
        self.pid_acid = a;
        self.pid_base = b;
        Ok(Commands { f1_cmd: u1 * fm, f2_cmd: u2 * fm, delta: self.delta })
    }

    /// Same supervisor, with the flow setpoints sent straight to the valves.
    pub fn fuzzy_only_step(
        &mut self,
        cfg: &CascadeConfig,
        plant: &PlantParams,
        t: f64,
        ph_setpoint: f64,
        readings: &SensorReadings,
        dt: f64,
    ) -> Result<Commands, HybridError> {
        self.supervise(cfg, plant, t, ph_setpoint, readings.ph, dt)?;
        let (s1, s2) = self.flow_setpoints(cfg);
        Ok(Commands { f1_cmd: s1.min(plant.f_max), f2_cmd: s2.min(plant.f_max), delta: self.delta })
    }

    /// Dispatches on `cfg.controller_kind`.
    pub fn step(
        &mut self,
        cfg: &CascadeConfig,
        plant: &PlantParams,
        t: f64,
        ph_setpoint: f64,
        readings: &SensorReadings,
        dt: f64,
    ) -> Result<Commands, HybridError> {
        match cfg.controller_kind {
            ControllerKind::Hybrid => self.control_step(cfg, plant, t, ph_setpoint, readings, dt),
            ControllerKind::FuzzyOnly => self.fuzzy_only_step(cfg, plant, t, ph_setpoint, readings, dt),
        }
    }
}

fn setpoints(split: f64, f_total: f64) -> (f64, f64) {
    ((1.0 - split) * f_total, split * f_total)
}
