//! Trace-driven link model: a step-function bandwidth trace with outages
//! (each extended by an application-layer re-establishment dead time) and a
//! chunk download integrator.

use rand::Rng;
use thiserror::Error;

use crate::outage::{validate_events, OutageEvent};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("bandwidth trace has no samples")]
    EmptyTrace,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("download starting at {start_s}s can never complete: trace ends at zero bandwidth")]
    StarvedForever { start_s: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTrace<T> {
    samples: Vec<(T, T)>,
    outages: Vec<OutageEvent<T>>,
    reestablish_delay_s: T,
    /// outages extended by the dead time, merged where they touch
    dead: Vec<(T, T)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownloadResult<T> {
    pub finish_t_s: T,
    pub avg_throughput_kbps: T,
    pub stalled_by_outage: bool,
}

impl<T: Scalar> NetworkTrace<T> {
    pub fn new(samples: Vec<(T, T)>, outages: Vec<OutageEvent<T>>, reestablish_delay_s: T) -> Result<Self, NetworkError> {
        if samples.is_empty() {
            return Err(NetworkError::EmptyTrace);
        }
        for w in samples.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(NetworkError::InvalidTrace(format!("sample times must increase strictly ({} then {})", w[0].0, w[1].0)));
            }
        }
        if samples.iter().any(|&(t, bw)| !(bw >= T::zero()) || !bw.is_finite() || !t.is_finite()) {
            return Err(NetworkError::InvalidTrace("bandwidth samples must be finite and non-negative".into()));
        }
        if !(reestablish_delay_s >= T::zero()) {
            return Err(NetworkError::InvalidTrace("re-establishment delay must be non-negative".into()));
        }
        validate_events(&outages).map_err(|e| NetworkError::InvalidTrace(e.to_string()))?;

        let mut dead: Vec<(T, T)> = Vec::with_capacity(outages.len());
        for o in &outages {
            let (start, end) = (o.onset_s, o.end_s() + reestablish_delay_s);
            match dead.last_mut() {
                Some(last) if start <= last.1 => last.1 = last.1.max(end),
                _ => dead.push((start, end)),
            }
        }
        Ok(Self { samples, outages, reestablish_delay_s, dead })
    }

    /// Constant-bandwidth trace without outages.
    pub fn constant(bandwidth_kbps: T) -> Self {
        Self::new(vec![(T::zero(), bandwidth_kbps)], Vec::new(), T::zero()).expect("valid constant trace")
    }

    pub fn samples(&self) -> &[(T, T)] {
        &self.samples
    }

    pub fn outages(&self) -> &[OutageEvent<T>] {
        &self.outages
    }

    pub fn reestablish_delay_s(&self) -> T {
        self.reestablish_delay_s
    }

    /// Zero-bandwidth intervals `[start, end)` after the dead-time extension.
    pub fn dead_intervals(&self) -> &[(T, T)] {
        &self.dead
    }

    fn dead_interval_at(&self, t: T) -> Option<(T, T)> {
        let idx = self.dead.partition_point(|d| d.0 <= t);
        (idx > 0 && t < self.dead[idx - 1].1).then(|| self.dead[idx - 1])
    }

    /// Bandwidth from the samples alone, ignoring outages.
    pub fn nominal_bandwidth(&self, t: T) -> T {
        self.step_value(t)
    }

    fn step_value(&self, t: T) -> T {
        let idx = self.samples.partition_point(|s| s.0 <= t);
        if idx == 0 {
            self.samples[0].1
        } else {
            self.samples[idx - 1].1
        }
    }

    /// Bandwidth available at time `t` (kbps).
    pub fn effective_bandwidth(&self, t: T) -> T {
        if self.dead_interval_at(t).is_some() {
            T::zero()
        } else {
            self.step_value(t)
        }
    }

    /// Rate on `[t, next)` and the next point where it may change (`inf` if never).
    fn segment(&self, t: T) -> (T, T) {
        if let Some((_, end)) = self.dead_interval_at(t) {
            return (T::zero(), end);
        }
        let next_sample = self.samples.get(self.samples.partition_point(|s| s.0 <= t)).map(|s| s.0).unwrap_or(T::infinity());
        let next_dead = self.dead.get(self.dead.partition_point(|d| d.0 <= t)).map(|d| d.0).unwrap_or(T::infinity());
        (self.step_value(t), next_sample.min(next_dead))
    }

    /// Downloads `size_kbits` starting at `start_t_s`.
    pub fn download_chunk(&self, start_t_s: T, size_kbits: T) -> Result<DownloadResult<T>, NetworkError> {
        debug_assert!(size_kbits > T::zero());
        let mut t = start_t_s;
        let mut remaining = size_kbits;
        let finish = loop {
            let (rate, next) = self.segment(t);
            if rate > T::zero() {
                let capacity = rate * (next - t);
                if capacity >= remaining {
                    break t + remaining / rate;
                }
                remaining = remaining - capacity;
            } else if next.is_infinite() {
                return Err(NetworkError::StarvedForever { start_s: start_t_s.as_f64() });
            }
            t = next;
        };
        let stalled_by_outage = self.dead.iter().any(|&(s, e)| s < finish && e > start_t_s);
        Ok(DownloadResult { finish_t_s: finish, avg_throughput_kbps: size_kbits / (finish - start_t_s), stalled_by_outage })
    }
}

/// Piecewise-constant bandwidth: a log-normal level (given median and log
/// standard deviation) redrawn every `resample_s` seconds over `[0, horizon_s]`.
pub fn synth_bandwidth<T: Scalar, R: Rng + ?Sized>(
    median_kbps: T,
    log_sigma: T,
    resample_s: T,
    horizon_s: T,
    rng: &mut R,
) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let mut t = T::zero();
    let mu = median_kbps.ln();
    loop {
        out.push((t, (mu + log_sigma * T::sample_standard_normal(rng)).exp()));
        t = t + resample_s;
        if t > horizon_s {
            break;
        }
    }
    out
}
