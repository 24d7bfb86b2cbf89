//! Experiment configuration, seeded Monte Carlo drivers and result files.

mod config;
mod run;

pub use config::{
    BuiltinSet, Directions, EstimationSettings, ExperimentConfig, ProfileSpec,
    DEFAULT_NMSE_THRESHOLD_DB, WORKERS_ENV,
};
pub use run::{
    read_csv, registry_bound, replay_row, run_estimation, run_sweep, run_trials, summarize,
    trial_seed, write_csv, write_json, write_records_csv, EstimationRow, PointSummary, ResultRow,
    SweepOutput, CSV_HEADER,
};
