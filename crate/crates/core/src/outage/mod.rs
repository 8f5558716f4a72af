//! Statistical model of handover outages: when they happen (slot-aligned
//! Bernoulli trials modulated by time of day) and how long they last (NIG).

mod calibrate;
mod nig;
mod occurrence;

use thiserror::Error;

pub use calibrate::{
    calibrate_nig, evaluate_fit_sse, Calibration, HistogramSpec, QuantileTarget, CALIBRATION_TOLERANCE, DEFAULT_TARGETS,
    MIN_FIT_SAMPLES,
};
pub use nig::{
    bessel_k1_scaled, nig_cdf, nig_pdf, positive_cdf, positive_cdf_many, sample_inverse_gaussian, sample_outage_duration, NigParams,
    DEFAULT_NIG,
};
pub use occurrence::{
    default_diurnal_table, default_p_slot, resolve_overlaps, sample_occurrences, synthesize_outage_trace,
    validate_events, OccurrenceParams, OutageEvent, DEFAULT_SLOT_OFFSETS_S,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutageError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid calibration targets: {0}")]
    InvalidTargets(String),
    #[error("calibration did not converge (residual {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("histogram has a degenerate bin range")]
    EmptyBins,
    #[error("not enough samples in range: got {got}, need {need}")]
    InsufficientSamples { got: usize, need: usize },
}
