//! Experiment runner: config, the ABR × variant × seed matrix, paired
//! comparisons and output files.

mod config;
mod io;
mod report;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{BandwidthSource, ExperimentConfig, OutageSource, PredictorKind, RawConfig, TraceSpec, Variant, CONFIG_REFERENCE};
pub use io::{read_bandwidth_csv, read_outage_csv, read_summary_csv, read_targets_csv, write_bandwidth_csv, write_outage_csv, write_summary_csv};
pub use report::{cdf_points, render_report, summarize, write_cdf_files, write_report, AbrComparison, Comparison, Report};
pub use run::{build_trace, run_matrix, summarize_run, write_outputs, MatrixResult, RunSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("run {abr}/{variant}/seed {seed} has no counterpart")]
    UnpairedRuns { abr: String, variant: String, seed: u64 },
    #[error("run {abr}/{variant}/seed {seed} appears twice")]
    DuplicateRun { abr: String, variant: String, seed: u64 },
    #[error("session {abr}/{variant}/seed {seed}: {source}")]
    Session { abr: String, variant: String, seed: u64, source: crate::sara::SaraError },
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Predictor(#[from] crate::predictor::PredictorError),
    #[error(transparent)]
    Outage(#[from] crate::outage::OutageError),
}
