use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BandwidthSource, ExperimentConfig, OutageSource, PredictorKind, Variant};
use super::{io, report, HarnessError};
use crate::abr::AbrKind;
use crate::network::{synth_bandwidth, NetworkTrace};
use crate::outage::{synthesize_outage_trace, OutageEvent};
use crate::player::{chunk_qoe, QoEParams};
use crate::predictor::{NoisyPredictor, NullPredictor, OraclePredictor, Predictor};
use crate::sara::{run_session, SessionLog, SessionSetup};

pub const STREAM_BANDWIDTH: u64 = 0;
pub const STREAM_OUTAGES: u64 = 1;
pub const STREAM_OPTIMIZER: u64 = 2;
pub const STREAM_PREDICTOR: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-run metrics, one row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub abr: String,
    pub variant: String,
    pub seed: u64,
    pub predictor: String,
    pub chunks: usize,
    pub mean_bitrate_kbps: f64,
    pub rebuffer_total_s: f64,
    /// Mean stall length per rebuffer event.
    pub rebuffer_mean_s: f64,
    pub rebuffer_events: usize,
    pub mean_ltb_s: f64,
    /// Share of wall time spent at a speed other than 1x.
    pub speed_deviation_fraction: f64,
    pub qoe_lin: f64,
    pub qoe_log: f64,
    pub optimizer_runs: usize,
}

fn qoe_under(params: &QoEParams<f64>, ladder: &[f64], log: &SessionLog<f64>) -> f64 {
    let mut prev = (ladder[0], 1.0);
    let mut total = 0.0;
    for r in &log.records {
        total += chunk_qoe(params, ladder, r.bitrate_kbps, prev.0, r.beta, prev.1, r.rebuffer_chunk_s, r.ltb_s).unwrap_or(f64::NAN);
        prev = (r.bitrate_kbps, r.beta);
    }
    total
}

pub fn summarize_run(abr: AbrKind, variant: Variant, seed: u64, predictor: &str, log: &SessionLog<f64>, config: &ExperimentConfig) -> RunSummary {
    let recs = &log.records;
    let n = recs.len().max(1) as f64;
    let events = log.rebuffer_events();
    let total = log.rebuffer_total_s();
    let mut deviated = 0.0;
    let mut wall = 0.0;
    for (i, r) in recs.iter().enumerate() {
        let dt = recs.get(i + 1).map_or(config.manifest.chunk_s, |next| next.wall_t_s - r.wall_t_s);
        wall += dt;
        if r.beta != 1.0 {
            deviated += dt;
        }
    }
    let with_ref = |p: QoEParams<f64>| QoEParams { gamma_s: config.qoe.gamma_s, ltb0_s: config.qoe.ltb0_s, smoothness: config.qoe.smoothness, ..p };
    let ladder = &config.manifest.ladder_kbps;
    RunSummary {
        abr: abr.name().into(),
        variant: variant.name().into(),
        seed,
        predictor: predictor.into(),
        chunks: recs.len(),
        mean_bitrate_kbps: recs.iter().map(|r| r.bitrate_kbps).sum::<f64>() / n,
        rebuffer_total_s: total,
        rebuffer_mean_s: if events == 0 { 0.0 } else { total / events as f64 },
        rebuffer_events: events,
        mean_ltb_s: recs.iter().map(|r| r.ltb_s).sum::<f64>() / n,
        speed_deviation_fraction: if wall > 0.0 { deviated / wall } else { 0.0 },
        qoe_lin: qoe_under(&with_ref(QoEParams::linear()), ladder, log),
        qoe_log: qoe_under(&with_ref(QoEParams::log()), ladder, log),
        optimizer_runs: log.optimizer_runs,
    }
}

/// The network trace and ground-truth outages for one seed.
pub fn build_trace(config: &ExperimentConfig, seed: u64) -> Result<(NetworkTrace<f64>, Vec<OutageEvent<f64>>), HarnessError> {
    // Stalls stretch wall time past the content duration.
    let horizon = 2.0 * config.manifest.chunk_s * config.manifest.total_chunks as f64 + 300.0;
    let samples = match &config.trace.bandwidth {
        BandwidthSource::File(p) => io::read_bandwidth_csv(p)?,
        BandwidthSource::Synthetic { median_kbps, log_sigma, resample_s } => {
            synth_bandwidth(*median_kbps, *log_sigma, *resample_s, horizon, &mut stream(seed, STREAM_BANDWIDTH))
        }
    };
    let outages = match &config.trace.outages {
        OutageSource::File(p) => io::read_outage_csv(p)?,
        OutageSource::Synthetic { occurrence, durations, start_hour } => {
            synthesize_outage_trace(occurrence, durations, *start_hour, horizon, &mut stream(seed, STREAM_OUTAGES))
        }
    };
    let trace = NetworkTrace::new(samples, outages.clone(), config.trace.reestablish_delay_s)?;
    Ok((trace, outages))
}

fn build_predictor(config: &ExperimentConfig, outages: &[OutageEvent<f64>], seed: u64, session_end_s: f64) -> Result<Predictor<f64>, HarnessError> {
    Ok(match &config.predictor {
        PredictorKind::None => Predictor::Null(NullPredictor),
        PredictorKind::Oracle { horizon_s } => Predictor::Oracle(OraclePredictor::new(outages.to_vec(), *horizon_s)),
        PredictorKind::Noisy(params) => {
            Predictor::Noisy(NoisyPredictor::new(outages, *params, &config.trace.nig, session_end_s, &mut stream(seed, STREAM_PREDICTOR))?)
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixResult {
    /// Ordered by ABR, then seed, then variant.
    pub summaries: Vec<RunSummary>,
    pub logs: Vec<SessionLog<f64>>,
}

pub fn run_matrix(config: &ExperimentConfig) -> Result<MatrixResult, HarnessError> {
    let traces = config.seeds.par_iter().map(|&s| build_trace(config, s)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(AbrKind, usize, Variant)> = config
        .abrs
        .iter()
        .flat_map(|&abr| (0..config.seeds.len()).flat_map(move |si| config.variants.iter().map(move |&v| (abr, si, v))))
        .collect();
    let session_end_s = 2.0 * config.manifest.chunk_s * config.manifest.total_chunks as f64;
    let results = jobs
        .par_iter()
        .map(|&(abr, si, variant)| {
            let seed = config.seeds[si];
            let (trace, outages) = &traces[si];
            let mut predictor = build_predictor(config, outages, seed, session_end_s)?;
            let setup = SessionSetup {
                manifest: &config.manifest,
                trace,
                kind: abr,
                abr: &config.abr_params,
                qoe: &config.qoe,
                sara: (variant == Variant::Sara).then_some(&config.pso),
            };
            let log = run_session(&setup, &mut predictor, &mut stream(seed, STREAM_OPTIMIZER)).map_err(|source| HarnessError::Session {
                abr: abr.name().into(),
                variant: variant.name().into(),
                seed,
                source,
            })?;
            Ok((summarize_run(abr, variant, seed, config.predictor.name(), &log, config), log))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let (summaries, logs) = results.into_iter().unzip();
    Ok(MatrixResult { summaries, logs })
}

/// Writes `summary.csv`, `report.txt`, `cdf/*.csv` and, when enabled,
/// `chunks/<abr>_<variant>_seed<seed>.csv` under `dir`. The report needs
/// both variants and is skipped otherwise.
pub fn write_outputs(config: &ExperimentConfig, result: &MatrixResult, dir: &Path) -> Result<Option<report::Report>, HarnessError> {
    let mk = |p: &Path| fs::create_dir_all(p).map_err(|source| HarnessError::Io { path: p.to_path_buf(), source });
    mk(dir)?;
    if config.write_chunk_logs {
        let chunks = dir.join("chunks");
        mk(&chunks)?;
        for (s, log) in result.summaries.iter().zip(&result.logs) {
            let path = chunks.join(format!("{}_{}_seed{}.csv", s.abr, s.variant, s.seed));
            let file = File::create(&path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
            log.write_csv(BufWriter::new(file)).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        }
    }
    io::write_summary_csv(&dir.join("summary.csv"), &result.summaries)?;
    report::write_cdf_files(&dir.join("cdf"), &result.summaries)?;
    if config.variants.len() < 2 {
        return Ok(None);
    }
    let rep = report::summarize(&result.summaries)?;
    report::write_report(&dir.join("report.txt"), &rep)?;
    Ok(Some(rep))
}
