//! Monte-Carlo evaluation: configuration, matching metrics and the sweep
//! driver behind the `bench` and `report` commands.
//!
//! RMSE is pooled per trial: all matched source errors of one trial form a
//! single root mean square, and sweeps report the median (and mean) of
//! these per-trial values.

mod bench;
mod config;
mod metrics;

pub use bench::{
    median, read_records, report, run_benchmark, run_trials, summarize, write_records, BenchmarkOutput, Summary,
    SummaryPoint, TrialRecord, RESULTS_FILE, SUMMARY_FILE,
};
pub use config::{
    ArrayConfig, ArraySetup, BenchmarkConfig, ChannelConfig, CorrelationConfig, NeefParams, NemoParams,
    PhaseModelConfig, ScenarioConfig, SourceConfig, SourceDraw, Sweep,
};
pub use metrics::{match_and_rmse, to_cartesian, Matching, MAX_MATCH};
