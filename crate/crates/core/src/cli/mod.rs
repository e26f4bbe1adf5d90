//! Experiment configs, multi-seed runs, CSV output and the stand-alone
//! search demo.

mod config;
mod demo;
mod run;

pub use config::{ExperimentConfig, Logging, TreeShape};
pub use demo::{
    random_incentives, reference_curve, search_demo, SearchDemoConfig, SearchDemoReport,
};
pub use run::{
    aggregate_csv, run_experiment, seed_csv, seed_environment, write_atomic, ExperimentOutput,
    SeedRun, CSV_HEADER,
};
