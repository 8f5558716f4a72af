//! Outage forecasters: a ground-truth oracle and a noisy model with sticky
//! per-outage detection and Poisson false alarms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::outage::{sample_outage_duration, synthesize_outage_trace, NigParams, OccurrenceParams, OutageEvent};
use crate::player::OutagePrediction;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("invalid predictor parameters: {0}")]
    InvalidParams(String),
}

pub trait OutagePredictor<T> {
    fn predict(&mut self, t_now_s: T) -> OutagePrediction<T>;
}

/// Earliest outage in progress at `t_now_s` or starting within the horizon.
pub fn oracle_predict<T: Scalar>(outages: &[OutageEvent<T>], t_now_s: T, horizon_s: T) -> OutagePrediction<T> {
    let first = outages.partition_point(|e| e.end_s() <= t_now_s);
    match outages.get(first) {
        Some(e) if e.onset_s <= t_now_s => OutagePrediction::at(T::zero(), e.end_s() - t_now_s),
        Some(e) if e.onset_s <= t_now_s + horizon_s => OutagePrediction::at(e.onset_s - t_now_s, e.duration_s),
        _ => OutagePrediction::none(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OraclePredictor<T> {
    outages: Vec<OutageEvent<T>>,
    horizon_s: T,
}

impl<T: Scalar> OraclePredictor<T> {
    pub fn new(outages: Vec<OutageEvent<T>>, horizon_s: T) -> Self {
        Self { outages, horizon_s }
    }
}

impl<T: Scalar> OutagePredictor<T> for OraclePredictor<T> {
    fn predict(&mut self, t_now_s: T) -> OutagePrediction<T> {
        oracle_predict(&self.outages, t_now_s, self.horizon_s)
    }
}

/// Window accuracy of 0.7943 at recall 0.3823 under the default occurrence
/// and duration laws (see `calibrate_false_alarm_rate`).
pub const DEFAULT_FALSE_ALARM_RATE_PER_S: f64 = 0.001_73;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyPredictorParams<T> {
    pub recall: T,
    pub window_accuracy_target: T,
    pub false_alarm_rate_per_s: T,
    pub onset_noise_std_s: T,
    pub duration_noise_std_s: T,
    pub horizon_s: T,
    pub cadence_s: T,
}

impl<T: Scalar> Default for NoisyPredictorParams<T> {
    fn default() -> Self {
        Self {
            recall: T::lit(0.3823),
            window_accuracy_target: T::lit(0.7943),
            false_alarm_rate_per_s: T::lit(DEFAULT_FALSE_ALARM_RATE_PER_S),
            onset_noise_std_s: T::lit(1.0),
            duration_noise_std_s: T::lit(0.5),
            horizon_s: T::lit(120.0),
            cadence_s: T::lit(5.0),
        }
    }
}

impl<T: Scalar> NoisyPredictorParams<T> {
    /// Perfect detection without noise or false alarms.
    pub fn perfect() -> Self {
        Self { recall: T::one(), false_alarm_rate_per_s: T::zero(), onset_noise_std_s: T::zero(), duration_noise_std_s: T::zero(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |m: &str| Err(PredictorError::InvalidParams(m.into()));
        for (name, p) in [("recall", self.recall), ("window_accuracy_target", self.window_accuracy_target)] {
            if !(p >= T::zero() && p <= T::one()) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, v) in [("false_alarm_rate_per_s", self.false_alarm_rate_per_s), ("onset_noise_std_s", self.onset_noise_std_s), ("duration_noise_std_s", self.duration_noise_std_s)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return bad(&format!("{name} must be finite and non-negative"));
            }
        }
        if !(self.cadence_s > T::zero()) || !(self.horizon_s >= self.cadence_s) {
            return bad("need cadence_s > 0 and horizon_s >= cadence_s");
        }
        Ok(())
    }
}

/// Forecasts refresh every `cadence_s`. Each true outage is detected or
/// missed once, with its perturbation fixed at that time; false alarms are
/// drawn up front over the session.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyPredictor<T> {
    params: NoisyPredictorParams<T>,
    /// Reported events sorted by onset: detected outages and false alarms.
    events: Vec<OutageEvent<T>>,
    detected: Vec<bool>,
}

impl<T: Scalar> NoisyPredictor<T> {
    pub fn new<R: Rng + ?Sized>(
        outages: &[OutageEvent<T>],
        params: NoisyPredictorParams<T>,
        false_alarm_durations: &NigParams<T>,
        session_end_s: T,
        rng: &mut R,
    ) -> Result<Self, PredictorError> {
        params.validate()?;
        let min_dur = T::lit(1e-3);
        let mut events = Vec::new();
        let mut detected = Vec::with_capacity(outages.len());
        for e in outages {
            let hit = T::sample_unit(rng) < params.recall;
            let n_on = T::sample_standard_normal(rng) * params.onset_noise_std_s;
            let n_dur = T::sample_standard_normal(rng) * params.duration_noise_std_s;
            detected.push(hit);
            if hit {
                events.push(OutageEvent { onset_s: (e.onset_s + n_on).max(T::zero()), duration_s: (e.duration_s + n_dur).max(min_dur) });
            }
        }
        if params.false_alarm_rate_per_s > T::zero() {
            let mut t = T::zero();
            let end = session_end_s + params.horizon_s;
            loop {
                t = t - (T::one() - T::sample_unit(rng)).ln() / params.false_alarm_rate_per_s;
                if t > end {
                    break;
                }
                events.push(OutageEvent { onset_s: t, duration_s: sample_outage_duration(false_alarm_durations, rng) });
            }
        }
        events.sort_by(|a, b| a.onset_s.partial_cmp(&b.onset_s).unwrap());
        Ok(Self { params, events, detected })
    }

    /// Detection status of each true outage, in input order.
    pub fn detected(&self) -> &[bool] {
        &self.detected
    }

    pub fn reported_events(&self) -> &[OutageEvent<T>] {
        &self.events
    }

    fn tick(&self, t: T) -> T {
        (t / self.params.cadence_s).floor() * self.params.cadence_s
    }
}

impl<T: Scalar> OutagePredictor<T> for NoisyPredictor<T> {
    fn predict(&mut self, t_now_s: T) -> OutagePrediction<T> {
        let tick = self.tick(t_now_s);
        let window_end = tick + self.params.horizon_s;
        // The forecast issued at `tick`, restricted to events not yet over.
        let next = self.events.iter().filter(|e| e.end_s() > t_now_s && e.end_s() > tick && e.onset_s <= window_end).min_by(|a, b| a.onset_s.partial_cmp(&b.onset_s).unwrap());
        match next {
            Some(e) if e.onset_s <= t_now_s => OutagePrediction::at(T::zero(), e.end_s() - t_now_s),
            Some(e) => OutagePrediction::at(e.onset_s - t_now_s, e.duration_s),
            None => OutagePrediction::none(),
        }
    }
}

/// Never predicts anything.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NullPredictor;

impl<T: Scalar> OutagePredictor<T> for NullPredictor {
    fn predict(&mut self, _t_now_s: T) -> OutagePrediction<T> {
        OutagePrediction::none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictor<T> {
    Null(NullPredictor),
    Oracle(OraclePredictor<T>),
    Noisy(NoisyPredictor<T>),
}

impl<T: Scalar> OutagePredictor<T> for Predictor<T> {
    fn predict(&mut self, t_now_s: T) -> OutagePrediction<T> {
        match self {
            Self::Null(p) => p.predict(t_now_s),
            Self::Oracle(p) => p.predict(t_now_s),
            Self::Noisy(p) => p.predict(t_now_s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    pub windows: u64,
    pub correct: u64,
    pub true_outages: u64,
    pub detected: u64,
}

impl WindowStats {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.windows as f64
    }

    pub fn recall(&self) -> f64 {
        self.detected as f64 / self.true_outages as f64
    }
}

/// Scores the noisy predictor on `hours` synthetic one-hour traces (start
/// hours cycling through the day). Each cadence tick is one window, labelled
/// positive when a true outage is under way or begins within the horizon.
pub fn evaluate_window_accuracy(
    params: &NoisyPredictorParams<f64>,
    occ: &OccurrenceParams<f64>,
    nig: &NigParams<f64>,
    hours: usize,
    seed: u64,
) -> Result<WindowStats, PredictorError> {
    params.validate()?;
    let mut trace_rng = ChaCha8Rng::seed_from_u64(seed);
    trace_rng.set_stream(1);
    let mut pred_rng = ChaCha8Rng::seed_from_u64(seed);
    pred_rng.set_stream(3);
    let ticks = (3600.0 / params.cadence_s).floor() as usize;
    let mut stats = WindowStats { windows: 0, correct: 0, true_outages: 0, detected: 0 };
    for h in 0..hours {
        // Extra horizon so windows near the end of the hour see their future.
        let outages = synthesize_outage_trace(occ, nig, (h % 24) as f64, 3600.0 + params.horizon_s, &mut trace_rng);
        let mut p = NoisyPredictor::new(&outages, *params, nig, 3600.0, &mut pred_rng)?;
        let counted = outages.iter().filter(|e| e.onset_s < 3600.0).count();
        stats.true_outages += counted as u64;
        stats.detected += p.detected()[..counted].iter().filter(|&&d| d).count() as u64;
        for k in 0..ticks {
            let t = k as f64 * params.cadence_s;
            let truth = oracle_predict(&outages, t, params.horizon_s).present;
            stats.windows += 1;
            stats.correct += u64::from(p.predict(t).present == truth);
        }
    }
    Ok(stats)
}

/// Bisects the false-alarm rate so the window accuracy meets the target.
pub fn calibrate_false_alarm_rate(
    params: &NoisyPredictorParams<f64>,
    occ: &OccurrenceParams<f64>,
    nig: &NigParams<f64>,
    hours: usize,
    seed: u64,
) -> Result<f64, PredictorError> {
    let acc = |rate: f64| evaluate_window_accuracy(&NoisyPredictorParams { false_alarm_rate_per_s: rate, ..*params }, occ, nig, hours, seed).map(|s| s.accuracy());
    let target = params.window_accuracy_target;
    if acc(0.0)? < target {
        return Err(PredictorError::InvalidParams("target accuracy is above what a silent false-alarm process reaches".into()));
    }
    let (mut lo, mut hi) = (0.0, 0.001);
    while acc(hi)? > target {
        hi *= 2.0;
        if hi > 10.0 {
            return Err(PredictorError::InvalidParams("target accuracy is unreachable".into()));
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if acc(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(onset_s: f64, duration_s: f64) -> OutageEvent<f64> {
        OutageEvent { onset_s, duration_s }
    }

    #[test]
    fn oracle_examples() {
        let outages = [ev(110.0, 1.5), ev(140.0, 3.0)];
        assert!(!oracle_predict(&outages, 0.0, 100.0).present);
        assert_eq!(oracle_predict(&outages, 100.0, 120.0), OutagePrediction::at(10.0, 1.5));
        assert_eq!(oracle_predict(&outages, 111.0, 120.0), OutagePrediction::at(0.0, 0.5));
        assert_eq!(oracle_predict(&outages, 111.5, 120.0), OutagePrediction::at(28.5, 3.0));
        assert!(!oracle_predict(&outages, 143.0, 120.0).present);
    }

    #[test]
    fn perfect_noisy_equals_oracle_on_ticks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let outages = synthesize_outage_trace(&OccurrenceParams::default(), &NigParams::default(), 20.0, 7200.0, &mut rng);
        assert!(outages.len() > 2);
        let mut p = NoisyPredictor::new(&outages, NoisyPredictorParams::perfect(), &NigParams::default(), 7200.0, &mut rng).unwrap();
        for k in 0..1440 {
            let t = k as f64 * 5.0;
            assert_eq!(p.predict(t), oracle_predict(&outages, t, 120.0), "t = {t}");
        }
    }

    #[test]
    fn zero_recall_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let outages = synthesize_outage_trace(&OccurrenceParams::default(), &NigParams::default(), 20.0, 7200.0, &mut rng);
        let params = NoisyPredictorParams { recall: 0.0, false_alarm_rate_per_s: 0.0, ..Default::default() };
        let mut p = NoisyPredictor::new(&outages, params, &NigParams::default(), 7200.0, &mut rng).unwrap();
        assert!((0..7200).all(|t| !p.predict(t as f64).present));
    }

    #[test]
    fn detection_is_sticky_between_ticks() {
        let outages = [ev(60.0, 2.0)];
        let params = NoisyPredictorParams { recall: 0.5, false_alarm_rate_per_s: 0.0, ..Default::default() };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = NoisyPredictor::new(&outages, params, &NigParams::default(), 120.0, &mut rng).unwrap();
            let seen: Vec<bool> = (0..12).map(|k| p.predict(k as f64 * 5.0).present).collect();
            assert!(seen.iter().all(|&s| s == p.detected()[0]));
        }
    }

    #[test]
    fn recall_matches_over_many_outages() {
        let stats = evaluate_window_accuracy(&NoisyPredictorParams::default(), &OccurrenceParams::default(), &NigParams::default(), 2000, 11).unwrap();
        let r = 0.3823;
        let se = (r * (1.0 - r) / stats.true_outages as f64).sqrt();
        assert!((stats.recall() - r).abs() < 3.0 * se, "recall {} over {} outages", stats.recall(), stats.true_outages);
    }

    #[test]
    fn rejects_bad_params() {
        let p = NoisyPredictorParams::<f64> { recall: 1.5, ..Default::default() };
        assert!(p.validate().is_err());
        let p = NoisyPredictorParams::<f64> { horizon_s: 1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
