#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Outage-aware live streaming: outage and network models, a live player,
//! baseline ABRs, the SARA speed/scalar optimizer, outage predictors and an
//! experiment harness.
//!
//! Model code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the harness uses.

pub mod abr;
pub mod harness;
pub mod network;
pub mod outage;
pub mod player;
pub mod predictor;
pub mod sara;
pub mod scalar;

pub type NetworkTraceF64 = network::NetworkTrace<f64>;
pub type OutageEventF64 = outage::OutageEvent<f64>;
pub type NigParamsF64 = outage::NigParams<f64>;
pub type OccurrenceParamsF64 = outage::OccurrenceParams<f64>;
pub type VideoManifestF64 = player::VideoManifest<f64>;
pub type QoEParamsF64 = player::QoEParams<f64>;
pub type PlayerStateF64 = player::PlayerState<f64>;
pub type OutagePredictionF64 = player::OutagePrediction<f64>;
pub type AbrParamsF64 = abr::AbrParams<f64>;
pub type PsoParamsF64 = sara::PsoParams<f64>;
pub type ControlDecisionF64 = sara::ControlDecision<f64>;
pub type SessionLogF64 = sara::SessionLog<f64>;
pub type PredictorF64 = predictor::Predictor<f64>;
