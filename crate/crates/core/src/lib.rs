//! Simulation of a sulfuric acid / sodium hydroxide neutralization tank under
//! cascade control: a fuzzy pH supervisor over per-stream PID flow loops.
//!
//! Modules, bottom up:
//! - [`chemistry`]: pH of a mixture from its reaction invariants.
//! - [`plant`]: tank balances, valve lags and sensors.
//! - [`pid`]: flow PID and Ziegler-Nichols tuning.
//! - [`fuzzy`]: the Mamdani supervisor.
//! - [`hybrid`]: the cascade and its fuzzy-only baseline.
//! - [`harness`]: experiment presets, runner, metrics, CSV and SVG output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chemistry;
pub mod error;
pub mod fuzzy;
pub mod harness;
pub mod hybrid;
pub mod pid;
pub mod plant;

pub use chemistry::{ph_of, split_for_ph, titration_curve, ChemistryError, EquilibriumConstants, IonInvariants};
pub use error::{Error, Result};
pub use fuzzy::{FuzzyController, FuzzyError, MembershipFunction};
pub use harness::{
    compute_metrics, experiment_1, experiment_2, experiment_3, run_experiment, ExperimentConfig, Metrics,
    SetpointSchedule, SimTrace, TuneConfig,
};
pub use hybrid::{CascadeConfig, ControllerKind, ControllerState, OuterLaw};
pub use pid::{zn_tune, ControllerType, PidGains, PidState, ZnUltimate};
pub use plant::{PlantParams, PlantState, SensorReadings, ValveModel};
