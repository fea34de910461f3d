//! Experiment presets, closed-loop runner, metrics and trace output.

pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod schedule;
pub mod trace;

pub use experiment::{
    experiment_1, experiment_2, experiment_3, run_experiment, run_experiment_with, run_tune, ExperimentConfig,
    TuneConfig, ValvePair, EXPERIMENT_3_SEQUENCE,
};
pub use metrics::{compute_metrics, Metrics, SegmentMetrics, SETTLING_BAND};
pub use plot::{plot, plot_comparison, render_svg};
pub use schedule::{Segment, SetpointSchedule};
pub use trace::{SimTrace, TraceRow, CSV_HEADER};
