//! Experiment orchestration: configuration, multi-seed runs, aggregation
//! and CSV reports.

pub mod config;
mod csvio;
pub mod eval;
pub mod report;
pub mod runner;

pub use config::{multimnist_tasks, parse_seeds, ExperimentConfig, Method, Overrides, Scale};
pub use csvio::{fmt_f64, read_csv};
pub use report::{report, ReportOutput, TableRow};
pub use runner::{
    generate, prepare_data, run_experiment, summarize, Aggregate, ExperimentData, ExperimentReport, SeedRun,
    SeedStatus, Stats, TaskResult,
};

/// Worker count from `AVIL_WORKERS`, defaulting to 1.
pub fn workers_from_env() -> crate::Result<usize> {
    match std::env::var("AVIL_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| crate::Error::Config(format!("AVIL_WORKERS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(1),
    }
}
