//! Experiment configuration, read from a sectioned TOML file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::abr::{AbrKind, AbrParams, BolaParams};
use crate::outage::{default_diurnal_table, default_p_slot, NigParams, OccurrenceParams, DEFAULT_NIG, DEFAULT_SLOT_OFFSETS_S};
use crate::player::{QoEParams, SmoothnessScale, VideoManifest};
use crate::predictor::NoisyPredictorParams;
use crate::sara::{PsoParams, SaraError};

/// Every key the config file accepts, with defaults.
pub const CONFIG_REFERENCE: &str = "\
CONFIG FILE (TOML; every key optional, defaults shown)

[manifest]
  ladder_kbps = [1000, 2500, 5000, 8000]
  chunk_s = 0.5
  duration_s = 600.0

[trace]
  bandwidth_file = \"\"            # CSV t_s,bandwidth_kbps; empty = synthetic per seed
  outage_file = \"\"               # CSV onset_s,duration_s; empty = synthetic per seed
  reestablish_delay_s = 2.0
  bandwidth_median_kbps = 25000.0 # synthetic log-normal level
  bandwidth_log_sigma = 0.7
  bandwidth_resample_s = 5.0
  start_hour = 20.0               # hour of day at t = 0
  p_slot = <derived>              # per-slot outage probability (0.2^(1/240) rule)
  diurnal = <24 values>           # hourly multipliers, mean 1
  nig_tail, nig_asym, nig_loc, nig_scale = <calibrated defaults>

[qoe]
  quality = \"linear\"              # linear | log
  omega = 4.33                    # 2.66 when quality = log
  rho = 1.0
  eta = 1.0
  iota = 1.0
  gamma_s = 2.0
  ltb0_s = 3.0
  smoothness = \"quality\"          # quality | raw_kbps

[abr]
  algorithms = [\"bba\", \"bola\", \"robustmpc\", \"dynamic\"]   # also: rate
  bba_reservoir_s = 1.0
  bba_cushion_s = 2.0
  bola_low_switch_s = 0.5         # used when bola_v / bola_gamma_p are absent
  bola_top_switch_s = 2.5
  bola_v, bola_gamma_p = <from switch points>
  rate_safety = 0.9
  dynamic_switch_s = 1.5
  dynamic_hysteresis = 0.1
  mpc_horizon = 5

[sara]
  variants = [\"bare\", \"sara\"]
  iterations = 20
  particles = 75
  aggressiveness = 0.1
  w_inertia = 0.7
  w_personal = 1.5
  w_global = 1.5
  offset_on_speed = false
  scaled_theta = true
  neutral_gate = true
  polish_speed = true
  coordinate_sweep = 64           # steps per scalar axis after the swarm; 0 = off
  refetch_margin = true
  latency_lookahead_s = 4.0

[predictor]
  kind = \"oracle\"                 # oracle | noisy | none
  horizon_s = 120.0
  recall = 0.3823                 # noisy only, as are the keys below
  window_accuracy_target = 0.7943
  false_alarm_rate_per_s = 0.00173
  onset_noise_std_s = 1.0
  duration_noise_std_s = 0.5
  cadence_s = 5.0

[run]
  seeds = []                      # explicit list; empty = seed_start .. seed_start + seed_count
  seed_start = 0
  seed_count = 1
  output_dir = \"out\"
  write_chunk_logs = true

Relative file paths are resolved against the config file's directory.
RNG substreams per seed: 0 bandwidth, 1 outages, 2 optimizer, 3 predictor.
";

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub manifest: ManifestSection,
    pub trace: TraceSection,
    pub qoe: QoeSection,
    pub abr: AbrSection,
    pub sara: SaraSection,
    pub predictor: PredictorSection,
    pub run: RunSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ManifestSection {
    pub ladder_kbps: Vec<f64>,
    pub chunk_s: f64,
    pub duration_s: f64,
}

impl Default for ManifestSection {
    fn default() -> Self {
        Self { ladder_kbps: vec![1000.0, 2500.0, 5000.0, 8000.0], chunk_s: 0.5, duration_s: 600.0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub bandwidth_file: String,
    pub outage_file: String,
    pub reestablish_delay_s: f64,
    pub bandwidth_median_kbps: f64,
    pub bandwidth_log_sigma: f64,
    pub bandwidth_resample_s: f64,
    pub start_hour: f64,
    pub p_slot: Option<f64>,
    pub diurnal: Option<Vec<f64>>,
    pub nig_tail: Option<f64>,
    pub nig_asym: Option<f64>,
    pub nig_loc: Option<f64>,
    pub nig_scale: Option<f64>,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            bandwidth_file: String::new(),
            outage_file: String::new(),
            reestablish_delay_s: 2.0,
            bandwidth_median_kbps: 25_000.0,
            bandwidth_log_sigma: 0.7,
            bandwidth_resample_s: 5.0,
            start_hour: 20.0,
            p_slot: None,
            diurnal: None,
            nig_tail: None,
            nig_asym: None,
            nig_loc: None,
            nig_scale: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QoeSection {
    pub quality: Option<String>,
    pub omega: Option<f64>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub iota: Option<f64>,
    pub gamma_s: Option<f64>,
    pub ltb0_s: Option<f64>,
    pub smoothness: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AbrSection {
    pub algorithms: Option<Vec<String>>,
    pub bba_reservoir_s: Option<f64>,
    pub bba_cushion_s: Option<f64>,
    pub bola_low_switch_s: Option<f64>,
    pub bola_top_switch_s: Option<f64>,
    pub bola_v: Option<f64>,
    pub bola_gamma_p: Option<f64>,
    pub rate_safety: Option<f64>,
    pub dynamic_switch_s: Option<f64>,
    pub dynamic_hysteresis: Option<f64>,
    pub mpc_horizon: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SaraSection {
    pub variants: Option<Vec<String>>,
    pub iterations: Option<usize>,
    pub particles: Option<usize>,
    pub aggressiveness: Option<f64>,
    pub w_inertia: Option<f64>,
    pub w_personal: Option<f64>,
    pub w_global: Option<f64>,
    pub offset_on_speed: Option<bool>,
    pub scaled_theta: Option<bool>,
    pub neutral_gate: Option<bool>,
    pub polish_speed: Option<bool>,
    pub coordinate_sweep: Option<usize>,
    pub refetch_margin: Option<bool>,
    pub latency_lookahead_s: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorSection {
    pub kind: Option<String>,
    pub horizon_s: Option<f64>,
    pub recall: Option<f64>,
    pub window_accuracy_target: Option<f64>,
    pub false_alarm_rate_per_s: Option<f64>,
    pub onset_noise_std_s: Option<f64>,
    pub duration_noise_std_s: Option<f64>,
    pub cadence_s: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub seed_start: u64,
    pub seed_count: u64,
    pub output_dir: String,
    pub write_chunk_logs: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seeds: Vec::new(), seed_start: 0, seed_count: 1, output_dir: "out".into(), write_chunk_logs: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Bare,
    Sara,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bare => "bare",
            Self::Sara => "sara",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bare" => Some(Self::Bare),
            "sara" => Some(Self::Sara),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PredictorKind {
    None,
    Oracle { horizon_s: f64 },
    Noisy(NoisyPredictorParams<f64>),
}

impl PredictorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Oracle { .. } => "oracle",
            Self::Noisy(_) => "noisy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BandwidthSource {
    File(PathBuf),
    Synthetic { median_kbps: f64, log_sigma: f64, resample_s: f64 },
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum OutageSource {
    File(PathBuf),
    Synthetic { occurrence: OccurrenceParams<f64>, durations: NigParams<f64>, start_hour: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSpec {
    pub bandwidth: BandwidthSource,
    pub outages: OutageSource,
    pub reestablish_delay_s: f64,
    /// Durations for noisy-predictor false alarms.
    pub nig: NigParams<f64>,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: VideoManifest<f64>,
    pub trace: TraceSpec,
    pub qoe: QoEParams<f64>,
    pub abrs: Vec<AbrKind>,
    pub abr_params: AbrParams<f64>,
    pub variants: Vec<Variant>,
    pub pso: PsoParams<f64>,
    pub predictor: PredictorKind,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub write_chunk_logs: bool,
}

fn cfg_err(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config { path: path.into(), message: message.into() }
}

fn resolve(base: &Path, s: &str) -> PathBuf {
    let p = PathBuf::from(s);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| cfg_err(&e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_default(), e.message()))?;
        Self::from_raw(raw, base_dir)
    }

    pub fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self, HarnessError> {
        let m = &raw.manifest;
        if !(m.duration_s > 0.0) {
            return Err(cfg_err("manifest.duration_s", "must be positive"));
        }
        let total = (m.duration_s / m.chunk_s).ceil();
        let manifest = VideoManifest::new(m.ladder_kbps.clone(), m.chunk_s, if total.is_finite() { total as usize } else { 0 })
            .map_err(|e| cfg_err("manifest", e.to_string()))?;

        let t = &raw.trace;
        if !(t.reestablish_delay_s >= 0.0) {
            return Err(cfg_err("trace.reestablish_delay_s", "must be non-negative"));
        }
        let nig = NigParams::new(
            t.nig_tail.unwrap_or(DEFAULT_NIG.tail),
            t.nig_asym.unwrap_or(DEFAULT_NIG.asym),
            t.nig_loc.unwrap_or(DEFAULT_NIG.loc),
            t.nig_scale.unwrap_or(DEFAULT_NIG.scale),
        )
        .map_err(|e| cfg_err("trace.nig_*", e.to_string()))?;
        let bandwidth = if t.bandwidth_file.is_empty() {
            if !(t.bandwidth_median_kbps > 0.0) || !(t.bandwidth_log_sigma >= 0.0) || !(t.bandwidth_resample_s > 0.0) {
                return Err(cfg_err("trace.bandwidth_*", "median and resample period must be positive, sigma non-negative"));
            }
            BandwidthSource::Synthetic { median_kbps: t.bandwidth_median_kbps, log_sigma: t.bandwidth_log_sigma, resample_s: t.bandwidth_resample_s }
        } else {
            let p = resolve(base_dir, &t.bandwidth_file);
            if !p.is_file() {
                return Err(cfg_err("trace.bandwidth_file", format!("{} does not exist", p.display())));
            }
            BandwidthSource::File(p)
        };
        let outages = if t.outage_file.is_empty() {
            let table = match &t.diurnal {
                None => default_diurnal_table(),
                Some(v) => v.as_slice().try_into().map_err(|_| cfg_err("trace.diurnal", format!("needs 24 values, got {}", v.len())))?,
            };
            let occurrence = OccurrenceParams::new(t.p_slot.unwrap_or_else(default_p_slot), DEFAULT_SLOT_OFFSETS_S.to_vec(), table)
                .map_err(|e| cfg_err("trace.p_slot / trace.diurnal", e.to_string()))?;
            if !(0.0..24.0).contains(&t.start_hour) {
                return Err(cfg_err("trace.start_hour", "must lie in [0, 24)"));
            }
            OutageSource::Synthetic { occurrence, durations: nig, start_hour: t.start_hour }
        } else {
            let p = resolve(base_dir, &t.outage_file);
            if !p.is_file() {
                return Err(cfg_err("trace.outage_file", format!("{} does not exist", p.display())));
            }
            OutageSource::File(p)
        };
        let trace = TraceSpec { bandwidth, outages, reestablish_delay_s: t.reestablish_delay_s, nig };

        let q = &raw.qoe;
        let base_qoe = match q.quality.as_deref().unwrap_or("linear") {
            "linear" => QoEParams::linear(),
            "log" => QoEParams::log(),
            other => return Err(cfg_err("qoe.quality", format!("unknown variant {other:?}"))),
        };
        let smoothness = match q.smoothness.as_deref().unwrap_or("quality") {
            "quality" => SmoothnessScale::Quality,
            "raw_kbps" => SmoothnessScale::RawKbps,
            other => return Err(cfg_err("qoe.smoothness", format!("unknown scale {other:?}"))),
        };
        let qoe = QoEParams {
            omega: q.omega.unwrap_or(base_qoe.omega),
            rho: q.rho.unwrap_or(base_qoe.rho),
            eta: q.eta.unwrap_or(base_qoe.eta),
            iota: q.iota.unwrap_or(base_qoe.iota),
            gamma_s: q.gamma_s.unwrap_or(base_qoe.gamma_s),
            ltb0_s: q.ltb0_s.unwrap_or(base_qoe.ltb0_s),
            quality: base_qoe.quality,
            smoothness,
        };
        qoe.validate().map_err(|e| cfg_err("qoe", e.to_string()))?;

        let a = &raw.abr;
        let names = a.algorithms.clone().unwrap_or_else(|| AbrKind::BASELINES.iter().map(|k| k.name().to_string()).collect());
        if names.is_empty() {
            return Err(cfg_err("abr.algorithms", "at least one ABR is required"));
        }
        let abrs = names
            .iter()
            .map(|n| AbrKind::from_name(n).ok_or_else(|| cfg_err("abr.algorithms", format!("unknown ABR {n:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let defaults = AbrParams::live_defaults(&manifest.ladder_kbps, manifest.chunk_s);
        let bola = match (a.bola_v, a.bola_gamma_p) {
            (Some(v), Some(gamma_p)) => BolaParams { v, gamma_p },
            (None, None) => crate::abr::bola_params_for_switches(
                &manifest.ladder_kbps,
                manifest.chunk_s,
                a.bola_low_switch_s.unwrap_or(0.5),
                a.bola_top_switch_s.unwrap_or(2.5),
            )
            .map_err(|e| cfg_err("abr.bola_*_switch_s", e.to_string()))?,
            _ => return Err(cfg_err("abr.bola_v", "bola_v and bola_gamma_p must be given together")),
        };
        let abr_params = AbrParams {
            bba_reservoir_s: a.bba_reservoir_s.unwrap_or(defaults.bba_reservoir_s),
            bba_cushion_s: a.bba_cushion_s.unwrap_or(defaults.bba_cushion_s),
            bola,
            rate_safety: a.rate_safety.unwrap_or(defaults.rate_safety),
            dynamic_switch_s: a.dynamic_switch_s.unwrap_or(defaults.dynamic_switch_s),
            dynamic_hysteresis: a.dynamic_hysteresis.unwrap_or(defaults.dynamic_hysteresis),
            mpc_horizon: a.mpc_horizon.unwrap_or(defaults.mpc_horizon),
        };
        abr_params.validate().map_err(|e| cfg_err("abr", e.to_string()))?;

        let s = &raw.sara;
        let variants = match &s.variants {
            None => vec![Variant::Bare, Variant::Sara],
            Some(v) => v.iter().map(|n| Variant::from_name(n).ok_or_else(|| cfg_err("sara.variants", format!("unknown variant {n:?}")))).collect::<Result<Vec<_>, _>>()?,
        };
        if variants.is_empty() {
            return Err(cfg_err("sara.variants", "at least one variant is required"));
        }
        let d = PsoParams::<f64>::default();
        let pso = PsoParams {
            iterations: s.iterations.unwrap_or(d.iterations),
            particles: s.particles.unwrap_or(d.particles),
            aggressiveness: s.aggressiveness.unwrap_or(d.aggressiveness),
            w_inertia: s.w_inertia.unwrap_or(d.w_inertia),
            w_personal: s.w_personal.unwrap_or(d.w_personal),
            w_global: s.w_global.unwrap_or(d.w_global),
            offset_on_speed: s.offset_on_speed.unwrap_or(d.offset_on_speed),
            scaled_theta: s.scaled_theta.unwrap_or(d.scaled_theta),
            neutral_gate: s.neutral_gate.unwrap_or(d.neutral_gate),
            polish_speed: s.polish_speed.unwrap_or(d.polish_speed),
            coordinate_sweep: s.coordinate_sweep.unwrap_or(d.coordinate_sweep),
            refetch_margin: s.refetch_margin.unwrap_or(d.refetch_margin),
            latency_lookahead_s: s.latency_lookahead_s.unwrap_or(d.latency_lookahead_s),
        };
        if let Err(SaraError::InvalidParams(msg)) = pso.validate() {
            // messages lead with the offending field
            let field = msg.split_whitespace().next().unwrap_or_default();
            return Err(cfg_err(&format!("sara.{field}"), msg));
        }

        let p = &raw.predictor;
        let nd = NoisyPredictorParams::<f64>::default();
        let horizon_s = p.horizon_s.unwrap_or(nd.horizon_s);
        let predictor = match p.kind.as_deref().unwrap_or("oracle") {
            "none" => PredictorKind::None,
            "oracle" => {
                if !(horizon_s > 0.0) {
                    return Err(cfg_err("predictor.horizon_s", "must be positive"));
                }
                PredictorKind::Oracle { horizon_s }
            }
            "noisy" => {
                let params = NoisyPredictorParams {
                    recall: p.recall.unwrap_or(nd.recall),
                    window_accuracy_target: p.window_accuracy_target.unwrap_or(nd.window_accuracy_target),
                    false_alarm_rate_per_s: p.false_alarm_rate_per_s.unwrap_or(nd.false_alarm_rate_per_s),
                    onset_noise_std_s: p.onset_noise_std_s.unwrap_or(nd.onset_noise_std_s),
                    duration_noise_std_s: p.duration_noise_std_s.unwrap_or(nd.duration_noise_std_s),
                    horizon_s,
                    cadence_s: p.cadence_s.unwrap_or(nd.cadence_s),
                };
                params.validate().map_err(|e| cfg_err("predictor", e.to_string()))?;
                PredictorKind::Noisy(params)
            }
            other => return Err(cfg_err("predictor.kind", format!("unknown predictor {other:?}"))),
        };

        let r = &raw.run;
        let seeds: Vec<u64> = if r.seeds.is_empty() { (r.seed_start..r.seed_start + r.seed_count).collect() } else { r.seeds.clone() };
        if seeds.is_empty() {
            return Err(cfg_err("run.seed_count", "at least one seed is required"));
        }
        Ok(Self {
            manifest,
            trace,
            qoe,
            abrs,
            abr_params,
            variants,
            pso,
            predictor,
            seeds,
            output_dir: resolve(base_dir, &r.output_dir),
            write_chunk_logs: r.write_chunk_logs,
        })
    }
}
