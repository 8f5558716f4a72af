//! Handover-slot outage occurrence and full outage-trace synthesis.

use rand::Rng;

use super::nig::{sample_outage_duration, NigParams};
use super::OutageError;
use crate::scalar::Scalar;

/// Seconds within each minute at which the terminal is reassigned to a satellite.
pub const DEFAULT_SLOT_OFFSETS_S: [f64; 4] = [12.0, 27.0, 42.0, 57.0];

/// Slot probability that gives an 80% chance of at least one outage in an
/// hour of 240 slots: `1 − 0.2^(1/240)`.
pub fn default_p_slot() -> f64 {
    1.0 - 0.2_f64.powf(1.0 / 240.0)
}

/// Hour-of-day intensity shape before normalization: flat overnight and
/// through the working day, ramp from 15:00, peak at 20:00 at 2.5× the
/// off-peak level, back to baseline by 01:00.
const DIURNAL_SHAPE: [f64; 24] = [
    1.3, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, //
    1.0, 1.0, 1.0, 1.3, 1.6, 1.9, 2.2, 2.35, 2.5, 2.2, 1.9, 1.6,
];

/// [`DIURNAL_SHAPE`] rescaled to average exactly 1.
pub fn default_diurnal_table() -> [f64; 24] {
    normalize_table(&DIURNAL_SHAPE)
}

fn normalize_table(raw: &[f64; 24]) -> [f64; 24] {
    let mean = raw.iter().sum::<f64>() / 24.0;
    let mut out = [0.0; 24];
    for (o, r) in out.iter_mut().zip(raw) {
        *o = r / mean;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccurrenceParams<T> {
    pub p_slot: T,
    pub slot_offsets_s: Vec<T>,
    pub diurnal_table: [T; 24],
}

impl<T: Scalar> OccurrenceParams<T> {
    pub fn new(p_slot: T, slot_offsets_s: Vec<T>, diurnal_table: [T; 24]) -> Result<Self, OutageError> {
        let p = Self { p_slot, slot_offsets_s, diurnal_table };
        p.validate()?;
        Ok(p)
    }

    /// Same as [`OccurrenceParams::new`] but rescales any non-negative table to mean 1.
    pub fn with_shape(p_slot: T, slot_offsets_s: Vec<T>, shape: [T; 24]) -> Result<Self, OutageError> {
        let raw = shape.map(|v| v.as_f64());
        if raw.iter().any(|v| !(*v >= 0.0)) || raw.iter().sum::<f64>() <= 0.0 {
            return Err(OutageError::InvalidParams("diurnal shape must be non-negative and not all zero".into()));
        }
        Self::new(p_slot, slot_offsets_s, normalize_table(&raw).map(T::lit))
    }

    /// Constant hourly intensity.
    pub fn flat(p_slot: T) -> Self {
        Self {
            p_slot,
            slot_offsets_s: DEFAULT_SLOT_OFFSETS_S.iter().map(|&v| T::lit(v)).collect(),
            diurnal_table: [T::one(); 24],
        }
    }

    pub fn validate(&self) -> Result<(), OutageError> {
        if !(self.p_slot >= T::zero() && self.p_slot <= T::one()) {
            return Err(OutageError::InvalidParams(format!("p_slot must be in [0,1], got {}", self.p_slot)));
        }
        if self.slot_offsets_s.is_empty() {
            return Err(OutageError::InvalidParams("at least one slot offset is required".into()));
        }
        for w in self.slot_offsets_s.windows(2) {
            if !(w[0] < w[1]) {
                return Err(OutageError::InvalidParams("slot offsets must be strictly increasing".into()));
            }
        }
        if self.slot_offsets_s.iter().any(|&o| !(o >= T::zero() && o < T::lit(60.0))) {
            return Err(OutageError::InvalidParams("slot offsets must lie in [0, 60)".into()));
        }
        if self.diurnal_table.iter().any(|&v| !(v >= T::zero())) {
            return Err(OutageError::InvalidParams("diurnal multipliers must be non-negative".into()));
        }
        let mean = self.diurnal_table.iter().map(|v| v.as_f64()).sum::<f64>() / 24.0;
        let tol = if std::mem::size_of::<T>() < 8 { 1e-6 } else { 1e-9 };
        if (mean - 1.0).abs() > tol {
            return Err(OutageError::InvalidParams(format!("diurnal table must average 1.0, got {mean}")));
        }
        Ok(())
    }

    /// Firing probability of a slot at `t_s` seconds into a trace that began at `start_hour`.
    pub fn slot_probability(&self, start_hour: T, t_s: T) -> T {
        let hour = (start_hour + t_s / T::lit(3600.0)).as_f64().floor().rem_euclid(24.0) as usize;
        (self.p_slot * self.diurnal_table[hour]).min(T::one())
    }
}

impl<T: Scalar> Default for OccurrenceParams<T> {
    fn default() -> Self {
        Self {
            p_slot: T::lit(default_p_slot()),
            slot_offsets_s: DEFAULT_SLOT_OFFSETS_S.iter().map(|&v| T::lit(v)).collect(),
            diurnal_table: default_diurnal_table().map(T::lit),
        }
    }
}

/// Ground-truth outage: starts at `onset_s` (seconds from trace start), lasts `duration_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutageEvent<T> {
    pub onset_s: T,
    pub duration_s: T,
}

impl<T: Scalar> OutageEvent<T> {
    pub fn end_s(&self) -> T {
        self.onset_s + self.duration_s
    }
}

/// Checks the trace invariants: positive durations, sorted, non-overlapping.
pub fn validate_events<T: Scalar>(events: &[OutageEvent<T>]) -> Result<(), OutageError> {
    for e in events {
        if !(e.duration_s > T::zero()) || !(e.onset_s >= T::zero()) {
            return Err(OutageError::InvalidParams(format!("invalid outage event {e:?}")));
        }
    }
    for w in events.windows(2) {
        if !(w[0].end_s() <= w[1].onset_s) || !(w[0].onset_s < w[1].onset_s) {
            return Err(OutageError::InvalidParams(format!("overlapping or unsorted outages {:?} / {:?}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Every handover slot in `[0, horizon_s)` fires independently with its
/// hour's probability. Returns the sorted firing times.
pub fn sample_occurrences<T: Scalar, R: Rng + ?Sized>(
    params: &OccurrenceParams<T>,
    start_hour: T,
    horizon_s: T,
    rng: &mut R,
) -> Vec<T> {
    let mut out = Vec::new();
    if !(horizon_s > T::zero()) || params.p_slot <= T::zero() {
        return out;
    }
    let sixty = T::lit(60.0);
    let mut minute = T::zero();
    while minute < horizon_s {
        for &off in &params.slot_offsets_s {
            let t = minute + off;
            if t >= horizon_s {
                break;
            }
            let p = params.slot_probability(start_hour, t);
            if T::sample_unit(rng) < p {
                out.push(t);
            }
        }
        minute = minute + sixty;
    }
    out
}

/// Pairs onsets with durations, dropping any onset that falls inside the
/// preceding kept outage.
pub fn resolve_overlaps<T: Scalar>(onsets: &[T], durations: &[T]) -> Vec<OutageEvent<T>> {
    let mut events: Vec<OutageEvent<T>> = Vec::with_capacity(onsets.len());
    for (&onset_s, &duration_s) in onsets.iter().zip(durations) {
        if let Some(last) = events.last() {
            if onset_s < last.end_s() {
                continue;
            }
        }
        events.push(OutageEvent { onset_s, duration_s });
    }
    events
}

/// Slot-aligned onsets with independent NIG durations. A duration is drawn for
/// every onset (in time order) before overlaps are resolved, so the RNG stream
/// does not depend on which onsets end up suppressed.
pub fn synthesize_outage_trace<T: Scalar, R: Rng + ?Sized>(
    occ: &OccurrenceParams<T>,
    dur: &NigParams<T>,
    start_hour: T,
    horizon_s: T,
    rng: &mut R,
) -> Vec<OutageEvent<T>> {
    let onsets = sample_occurrences(occ, start_hour, horizon_s, rng);
    let durations: Vec<T> = onsets.iter().map(|_| sample_outage_duration(dur, rng)).collect();
    resolve_overlaps(&onsets, &durations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_table_is_normalized_with_peak_ratio() {
        let t = default_diurnal_table();
        let mean = t.iter().sum::<f64>() / 24.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((t[20] / t[5] - 2.5).abs() < 1e-12);
        assert!(OccurrenceParams::<f64>::default().validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = OccurrenceParams::<f64>::flat(0.1);
        p.slot_offsets_s = vec![27.0, 12.0];
        assert!(p.validate().is_err());
        let mut p = OccurrenceParams::<f64>::flat(1.5);
        assert!(p.validate().is_err());
        p.p_slot = 0.5;
        p.diurnal_table[3] = 2.0;
        assert!(p.validate().is_err());
        p.slot_offsets_s = vec![60.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_rate_gives_no_onsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = OccurrenceParams::<f64>::flat(0.0);
        assert!(sample_occurrences(&p, 0.0, 36_000.0, &mut rng).is_empty());
    }

    #[test]
    fn onsets_sit_on_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = OccurrenceParams::<f64>::flat(0.3);
        let onsets = sample_occurrences(&p, 0.0, 7200.0, &mut rng);
        assert!(!onsets.is_empty());
        for t in onsets {
            assert!(DEFAULT_SLOT_OFFSETS_S.contains(&t.rem_euclid(60.0)), "{t}");
        }
    }

    #[test]
    fn certain_slots_all_fire() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = OccurrenceParams::<f64>::flat(1.0);
        let onsets = sample_occurrences(&p, 0.0, 120.0, &mut rng);
        assert_eq!(onsets, vec![12.0, 27.0, 42.0, 57.0, 72.0, 87.0, 102.0, 117.0]);
    }

    #[test]
    fn overlap_drops_later_onsets() {
        let events = resolve_overlaps(&[27.0, 42.0, 57.0, 72.0], &[40.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            events,
            vec![OutageEvent { onset_s: 27.0, duration_s: 40.0 }, OutageEvent { onset_s: 72.0, duration_s: 1.0 }]
        );
        assert!(validate_events(&events).is_ok());
    }

    #[test]
    fn empty_horizon_is_empty_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace = synthesize_outage_trace(&OccurrenceParams::<f64>::default(), &NigParams::default(), 0.0, 0.0, &mut rng);
        assert!(trace.is_empty());
    }

    #[test]
    fn same_seed_same_trace() {
        let occ = OccurrenceParams::<f64>::flat(0.05);
        let a = synthesize_outage_trace(&occ, &NigParams::default(), 3.0, 36_000.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = synthesize_outage_trace(&occ, &NigParams::default(), 3.0, 36_000.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(validate_events(&a).is_ok());
    }
}
