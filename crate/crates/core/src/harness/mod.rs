//! Experiment configuration, drivers and output emission.

pub mod config;
pub mod runner;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind, RunMetrics, RunRecord};
pub use runner::{
    run_align_probe, run_analyze, run_concentration, run_extremal, run_gen, run_single,
    run_stability, run_stability_from, run_sweep, SingleRun,
};
