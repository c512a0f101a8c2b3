//! Experiment configuration, the end-to-end pipeline and its reports.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{Estimator, ExperimentConfig, RfiMode, Target};
pub use pipeline::{estimate_rfi, point_seed, recover, run_pipeline, run_pipeline_with, run_sweep, simulate, Acquisition, RfiEstimate};
pub use report::{plot_csv, reports_csv, timings_csv, RunReport, Timings};
