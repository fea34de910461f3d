//! Mixer-tank dynamics, valve actuators and the sensor set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemistry::{ph_of, ChemistryError, EquilibriumConstants, IonInvariants};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("plant state diverged at t = {t} s (non-finite or negative field)")]
    StateDiverged { t: f64 },
    #[error("invalid plant parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
}

/// Tank and feed description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Tank volume, L.
    pub volume: f64,
    /// Acid feed concentration, mol/L.
    pub c1: f64,
    /// Base feed concentration, mol/L.
    pub c2: f64,
    /// Per-stream flow limit, L/s.
    pub f_max: f64,
    pub constants: EquilibriumConstants,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self { volume: 5.0, c1: 0.052, c2: 0.052, f_max: 0.05, constants: EquilibriumConstants::DEFAULT }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let checks = [
            ("volume", self.volume, self.volume > 0.0),
            ("c1", self.c1, self.c1 >= 0.0),
            ("c2", self.c2, self.c2 >= 0.0),
            ("f_max", self.f_max, self.f_max > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(PlantError::InvalidParam { name, value });
            }
        }
        self.constants.validate()?;
        Ok(())
    }
}

/// First-order valve with direction-dependent time constant and a
/// steady-state gain mismatch between opening and closing strokes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValveModel {
    pub tau_open: f64,
    pub tau_close: f64,
    pub hysteresis_eps: f64,
}

impl Default for ValveModel {
    fn default() -> Self {
        Self { tau_open: 8.0, tau_close: 5.0, hysteresis_eps: 0.04 }
    }
}

impl ValveModel {
    pub const MAX_HYSTERESIS: f64 = 0.06;

    pub fn validate(&self) -> Result<(), PlantError> {
        let checks = [
            ("tau_open", self.tau_open, self.tau_open > 0.0),
            ("tau_close", self.tau_close, self.tau_close > 0.0),
            ("hysteresis_eps", self.hysteresis_eps, (0.0..=Self::MAX_HYSTERESIS).contains(&self.hysteresis_eps)),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(PlantError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    /// Steady-state flow reached when `commanded` is held after a stroke
    /// that started from `current`.
    pub fn target(&self, current: f64, commanded: f64, f_max: f64) -> Option<(f64, f64)> {
        if commanded > current {
            Some((commanded * (1.0 - self.hysteresis_eps), self.tau_open))
        } else if commanded < current {
            Some(((commanded * (1.0 + self.hysteresis_eps)).clamp(0.0, f_max), self.tau_close))
        } else {
            None
        }
    }
}

/// Exact discrete update of the valve lag over `dt`.
pub fn valve_step(current: f64, commanded: f64, model: &ValveModel, f_max: f64, dt: f64) -> f64 {
    match model.target(current, commanded, f_max) {
        None => current,
        Some((target, tau)) => target + (current - target) * (-dt / tau).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub inv: IonInvariants,
    /// Acid flow, L/s.
    pub f1_actual: f64,
    /// Base flow, L/s.
    pub f2_actual: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReadings {
    pub ph: f64,
    pub f1: f64,
    pub f2: f64,
    pub c1_meas: f64,
    pub c2_meas: f64,
}

/// `(dα/dt, dβ/dt)` from the component balances.
pub fn invariant_derivatives(inv: IonInvariants, f1: f64, f2: f64, params: &PlantParams) -> (f64, f64) {
    let out = f1 + f2;
    ((f1 * params.c1 - out * inv.alpha) / params.volume, (f2 * params.c2 - out * inv.beta) / params.volume)
}

/// One classical RK4 step of the component balances with flows held fixed.
pub fn rk4_invariants(inv: IonInvariants, f1: f64, f2: f64, params: &PlantParams, dt: f64) -> (f64, f64) {
    let deriv = |a: f64, b: f64| invariant_derivatives(IonInvariants { alpha: a, beta: b }, f1, f2, params);
    let (a, b) = (inv.alpha, inv.beta);
    let k1 = deriv(a, b);
    let k2 = deriv(a + 0.5 * dt * k1.0, b + 0.5 * dt * k1.1);
    let k3 = deriv(a + 0.5 * dt * k2.0, b + 0.5 * dt * k2.1);
    let k4 = deriv(a + dt * k3.0, b + dt * k3.1);
    (a + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0), b + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1))
}

/// Round-off may leave an invariant a hair below zero; anything further
/// below than this is treated as divergence.
const NEGATIVE_SLACK: f64 = -1e-15;

/// Advances valves, then the tank contents, by `dt`.
pub fn plant_step(
    state: &PlantState,
    f1_cmd: f64,
    f2_cmd: f64,
    params: &PlantParams,
    valves: (&ValveModel, &ValveModel),
    dt: f64,
) -> Result<PlantState, PlantError> {
    let f1 = valve_step(state.f1_actual, f1_cmd.clamp(0.0, params.f_max), valves.0, params.f_max, dt)
        .clamp(0.0, params.f_max);
    let f2 = valve_step(state.f2_actual, f2_cmd.clamp(0.0, params.f_max), valves.1, params.f_max, dt)
        .clamp(0.0, params.f_max);
    let (alpha, beta) = rk4_invariants(state.inv, f1, f2, params, dt);
    let t = state.t + dt;
    let fields = [alpha, beta, f1, f2, t];
    if fields.iter().any(|v| !v.is_finite()) || alpha < NEGATIVE_SLACK || beta < NEGATIVE_SLACK {
        return Err(PlantError::StateDiverged { t });
    }
    Ok(PlantState {
        inv: IonInvariants { alpha: alpha.max(0.0), beta: beta.max(0.0) },
        f1_actual: f1,
        f2_actual: f2,
        t,
    })
}

/// Optional Gaussian noise on the pH channel.
#[derive(Debug, Clone)]
pub struct PhNoise {
    dist: Normal<f64>,
    rng: ChaCha8Rng,
}

impl PhNoise {
    pub fn new(sigma: f64, seed: u64) -> Result<Self, PlantError> {
        let dist =
            Normal::new(0.0, sigma).map_err(|_| PlantError::InvalidParam { name: "noise sigma", value: sigma })?;
        Ok(Self { dist, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    fn sample(&mut self) -> f64 {
        self.dist.sample(&mut self.rng)
    }
}

/// Reads the instrument set. Flows and concentrations pass through
/// unchanged; pH picks up noise only when a generator is supplied.
pub fn measure(
    state: &PlantState,
    params: &PlantParams,
    noise: Option<&mut PhNoise>,
) -> Result<SensorReadings, PlantError> {
    let mut ph = ph_of(state.inv, params.constants)?;
    if let Some(n) = noise {
        ph = (ph + n.sample()).clamp(0.0, 14.0);
    }
    Ok(SensorReadings { ph, f1: state.f1_actual, f2: state.f2_actual, c1_meas: params.c1, c2_meas: params.c2 })
}
