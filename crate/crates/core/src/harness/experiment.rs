use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schedule::SetpointSchedule;
use super::trace::{SimTrace, TraceRow};
use crate::chemistry::{reachable_ph, IonInvariants};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyController;
use crate::hybrid::{CascadeConfig, ControllerKind, ControllerState};
use crate::pid::{find_ultimate, zn_tune, ControllerType, Fopdt, FopdtProbe, PidGains, UltimateSearch, ZnUltimate};
use crate::plant::{measure, plant_step, PhNoise, PlantParams, PlantState, ValveModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValvePair {
    pub acid: ValveModel,
    pub base: ValveModel,
}

/// Everything needed to reproduce one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantParams,
    pub valves: ValvePair,
    pub cascade: CascadeConfig,
    pub schedule: SetpointSchedule,
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
    pub initial_ph: f64,
    pub seed: u64,
    /// Standard deviation of additive pH sensor noise; 0 disables it.
    #[serde(default)]
    pub noise_sigma: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.valves.acid.validate()?;
        self.valves.base.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be at least dt, got {}", self.duration)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        self.cascade.validate(&self.plant, self.dt)?;
        self.schedule.validate()?;
        let (lo, hi) = reachable_ph(self.plant.c1, self.plant.c2, self.plant.constants)?;
        if !(lo..=hi).contains(&self.initial_ph) {
            return Err(Error::Config(format!(
                "initial_ph {} outside the range [{lo:.3}, {hi:.3}] the feeds can mix",
                self.initial_ph
            )));
        }
        Ok(())
    }

    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

fn base_config(c1: f64, c2: f64, schedule: SetpointSchedule, duration: f64) -> ExperimentConfig {
    ExperimentConfig {
        plant: PlantParams { c1, c2, ..PlantParams::default() },
        valves: ValvePair::default(),
        cascade: CascadeConfig::default(),
        schedule,
        duration,
        dt: 0.1,
        initial_ph: 7.0,
        seed: 0,
        noise_sigma: 0.0,
    }
}

/// Step 7 → 10 at 300 s and back at 600 s, equal 0.052 M feeds.
pub fn experiment_1() -> ExperimentConfig {
    base_config(
        0.052,
        0.052,
        SetpointSchedule::PiecewiseConstant { steps: vec![(0.0, 7.0), (300.0, 10.0), (600.0, 7.0)] },
        900.0,
    )
}

/// Square wave between 7 and 10 with a 600 s period from 300 s on;
/// 0.051 M acid and 0.0489 M base.
pub fn experiment_2() -> ExperimentConfig {
    base_config(
        0.051,
        0.0489,
        SetpointSchedule::SquareWave { center: 8.5, amplitude: 1.5, period: 600.0, t_start: 300.0 },
        2400.0,
    )
}

pub const EXPERIMENT_3_SEQUENCE: [f64; 8] = [7.0, 6.0, 8.0, 10.0, 8.0, 6.0, 9.0, 7.0];

/// Setpoints between 6 and 10 every 250 s over 2000 s; the two configs
/// differ only in controller kind.
pub fn experiment_3() -> (ExperimentConfig, ExperimentConfig) {
    let steps = EXPERIMENT_3_SEQUENCE.iter().enumerate().map(|(i, v)| (250.0 * i as f64, *v)).collect();
    let hybrid = base_config(0.052, 0.052, SetpointSchedule::PiecewiseConstant { steps }, 2000.0);
    let mut fuzzy_only = hybrid.clone();
    fuzzy_only.cascade.controller_kind = ControllerKind::FuzzyOnly;
    (hybrid, fuzzy_only)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SimTrace> {
    run_experiment_with(cfg, FuzzyController::default())
}

/// Closed-loop run starting at rest at `initial_ph`. Row `k` holds the
/// state at `t = k·dt` and the commands issued from it.
pub fn run_experiment_with(cfg: &ExperimentConfig, fuzzy: FuzzyController) -> Result<SimTrace> {
    cfg.validate()?;
    let plant = &cfg.plant;
    let valves = (&cfg.valves.acid, &cfg.valves.base);
    let mut cs = ControllerState::at_equilibrium(fuzzy, &cfg.cascade, plant, valves, cfg.initial_ph)?;
    let (f1, f2) = cs.flow_setpoints(&cfg.cascade);
    let r = cs.split;
    let mut st = PlantState {
        inv: IonInvariants::new(plant.c1 * (1.0 - r), plant.c2 * r)?,
        f1_actual: f1,
        f2_actual: f2,
        t: 0.0,
    };
    let mut noise = if cfg.noise_sigma > 0.0 { Some(PhNoise::new(cfg.noise_sigma, cfg.seed)?) } else { None };

    let n = cfg.steps();
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * cfg.dt;
        st.t = t;
        let sp = cfg.schedule.value(t);
        let rd = measure(&st, plant, noise.as_mut())?;
        let cmd = cs.step(&cfg.cascade, plant, t, sp, &rd, cfg.dt)?;
        rows.push(TraceRow {
            t,
            ph_sp: sp,
            ph: rd.ph,
            f1_cmd: cmd.f1_cmd,
            f2_cmd: cmd.f2_cmd,
            f1: st.f1_actual,
            f2: st.f2_actual,
            alpha: st.inv.alpha,
            beta: st.inv.beta,
            delta: cmd.delta,
        });
        st = plant_step(&st, cmd.f1_cmd, cmd.f2_cmd, plant, valves, cfg.dt)?;
    }
    Ok(SimTrace { rows })
}

/// Flow loop used to locate the ultimate point for tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub process: Fopdt,
    /// Simulation step, s.
    pub dt: f64,
    /// Length of each proportional-only trial, s.
    pub horizon: f64,
    #[serde(default)]
    pub search: UltimateSearch,
    pub controller_type: ControllerType,
}

impl Default for TuneConfig {
    /// Lag of 8 s (the valve opening constant), with gain and dead time set
    /// so the loop's ultimate point is G = 18, P = 33 s.
    fn default() -> Self {
        Self {
            process: Fopdt::with_ultimate(ZnUltimate { g: 18.0, p: 33.0 }, 8.0),
            dt: 0.05,
            horizon: 1500.0,
            search: UltimateSearch::default(),
            controller_type: ControllerType::Pid,
        }
    }
}

impl TuneConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let p = cfg.process;
        let s = cfg.search;
        let positive = [
            ("process.gain", p.gain),
            ("process.tau", p.tau),
            ("dt", cfg.dt),
            ("horizon", cfg.horizon),
            ("search.start_gain", s.start_gain),
            ("search.max_gain", s.max_gain),
            ("search.resolution", s.resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(p.delay >= 0.0) || !(s.growth > 1.0) || cfg.horizon < 10.0 * cfg.dt {
            return Err(Error::Config("need delay >= 0, search.growth > 1, horizon >= 10·dt".into()));
        }
        Ok(cfg)
    }
}

/// Locates the ultimate point of the configured loop and applies the
/// Ziegler-Nichols table.
pub fn run_tune(cfg: &TuneConfig) -> Result<(ZnUltimate, PidGains)> {
    let mut probe = FopdtProbe { process: cfg.process, dt: cfg.dt, horizon: cfg.horizon };
    let u = find_ultimate(&mut probe, &cfg.search)?;
    Ok((u, zn_tune(u, cfg.controller_type)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        let (h, f) = experiment_3();
        for cfg in [experiment_1(), experiment_2(), h, f] {
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn preset_contents() {
        let e1 = experiment_1();
        assert_eq!((e1.plant.c1, e1.plant.c2), (0.052, 0.052));
        assert_eq!(e1.schedule.value(450.0), 10.0);
        assert_eq!(e1.schedule.value(700.0), 7.0);
        assert_eq!(e1.duration, 900.0);

        let e2 = experiment_2();
        assert_eq!((e2.plant.c1, e2.plant.c2), (0.051, 0.0489));
        assert_eq!(e2.schedule.value(300.05), 10.0);
        assert_eq!(e2.duration, 2400.0);

        let (h, f) = experiment_3();
        assert_eq!(h.schedule.range(), (6.0, 10.0));
        assert_eq!(h.duration, 2000.0);
        let (hv, fv) = (serde_json::to_value(&h).unwrap(), serde_json::to_value(&f).unwrap());
        let diffs: Vec<_> = hv.as_object().unwrap().keys().filter(|k| hv[k.as_str()] != fv[k.as_str()]).collect();
        assert_eq!(diffs, ["cascade"]);
        let (hc, fc) = (&hv["cascade"], &fv["cascade"]);
        let inner: Vec<_> = hc.as_object().unwrap().keys().filter(|k| hc[k.as_str()] != fc[k.as_str()]).collect();
        assert_eq!(inner, ["controller_kind"]);
    }

    #[test]
    fn config_rejections() {
        let mut v = serde_json::to_value(experiment_1()).unwrap();
        v["bogus"] = 1.into();
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));

        let mut c = experiment_1();
        c.initial_ph = 13.5;
        assert!(c.validate().unwrap_err().is_config());
        let mut c = experiment_1();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = experiment_1();
        c.valves.base.hysteresis_eps = 0.2;
        assert!(c.validate().unwrap_err().is_config());
    }

    #[test]
    fn short_run_row_count_and_rest() {
        let mut c = experiment_1();
        c.duration = 1.0;
        let tr = run_experiment(&c).unwrap();
        assert_eq!(tr.len(), 10);
        tr.check_uniform().unwrap();

        c.duration = 200.0;
        c.initial_ph = 8.0;
        c.schedule = SetpointSchedule::constant(8.0);
        let tr = run_experiment(&c).unwrap();
        assert!(tr.rows.iter().all(|r| (r.ph - 8.0).abs() <= 0.05));
    }

    #[test]
    fn deterministic_and_seeded_noise() {
        let mut c = experiment_1();
        c.duration = 50.0;
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        c.noise_sigma = 0.02;
        let a = run_experiment(&c).unwrap();
        assert_eq!(a, run_experiment(&c).unwrap());
        c.seed = 1;
        assert_ne!(a, run_experiment(&c).unwrap());
    }

    #[test]
    fn tune_defaults_recover_reported_point() {
        let (u, g) = run_tune(&TuneConfig::default()).unwrap();
        assert!((u.g - 18.0).abs() < 1.8 && (u.p - 33.0).abs() < 3.3, "{u:?}");
        assert_eq!(g, zn_tune(u, ControllerType::Pid));
        let text = serde_json::to_string(&TuneConfig::default()).unwrap();
        assert_eq!(TuneConfig::from_json(&text).unwrap(), TuneConfig::default());
    }
}
