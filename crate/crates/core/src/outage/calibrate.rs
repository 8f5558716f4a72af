//! Quantile calibration of the NIG duration law and the histogram SSE used to
//! judge a fit.

use super::nig::{nig_pdf, positive_cdf_many, NigParams};
use super::OutageError;

/// Largest tolerated |F(value) − cum_prob| over the targets.
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileTarget {
    pub value_s: f64,
    pub cum_prob: f64,
}

impl QuantileTarget {
    pub const fn new(value_s: f64, cum_prob: f64) -> Self {
        Self { value_s, cum_prob }
    }
}

/// Anchors for the shipped duration law: 87.33% below 2 s, 2.73% above 5 s,
/// and a 35% mass below 0.5 s that fixes the shape of the body.
pub const DEFAULT_TARGETS: [QuantileTarget; 3] =
    [QuantileTarget::new(0.5, 0.35), QuantileTarget::new(2.0, 0.8733), QuantileTarget::new(5.0, 0.9727)];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub params: NigParams<f64>,
    /// max |F(value) − cum_prob| at the returned parameters
    pub residual: f64,
    pub evaluations: usize,
}

/// Minimal Nelder–Mead simplex minimizer.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: &[f64],
    step: f64,
    max_evals: usize,
    f_tol: f64,
) -> (Vec<f64>, f64, usize) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if values[0] <= f_tol || (values[n] - values[0]).abs() <= 1e-6 * f_tol.max(values[0].abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64, worst: &[f64]| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (worst[j] - centroid[j])).collect() };

        let reflected = along(-1.0, &simplex[n]);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0, &simplex[n]);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5, &simplex[n]);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(0.5, &simplex[n]);
                let fc = f(&c);
                (c, fc)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best], evals)
}

/// Unconstrained coordinates: (ln tail, atanh(asym/tail), loc, ln scale).
fn decode(u: &[f64]) -> NigParams<f64> {
    let tail = u[0].clamp(-12.0, 8.0).exp();
    NigParams { tail, asym: tail * u[1].clamp(-6.0, 6.0).tanh(), loc: u[2], scale: u[3].clamp(-12.0, 6.0).exp() }
}

fn encode(p: &NigParams<f64>) -> [f64; 4] {
    [p.tail.ln(), (p.asym / p.tail).atanh(), p.loc, p.scale.ln()]
}

fn max_mismatch(p: &NigParams<f64>, targets: &[QuantileTarget]) -> f64 {
    let xs: Vec<f64> = targets.iter().map(|t| t.value_s).collect();
    positive_cdf_many(&xs, p).iter().zip(targets).map(|(c, t)| (c - t.cum_prob).abs()).fold(0.0, f64::max)
}

/// Fits NIG parameters so that the positive-conditioned distribution function
/// passes through every `(value_s, cum_prob)` target.
pub fn calibrate_nig(targets: &[QuantileTarget]) -> Result<Calibration, OutageError> {
    if targets.len() < 3 {
        return Err(OutageError::InvalidTargets(format!("need at least 3 targets, got {}", targets.len())));
    }
    for t in targets {
        if !(t.cum_prob > 0.0 && t.cum_prob < 1.0) || !(t.value_s > 0.0) || !t.value_s.is_finite() {
            return Err(OutageError::InvalidTargets(format!("target out of range: {t:?}")));
        }
    }

    let xs: Vec<f64> = targets.iter().map(|t| t.value_s).collect();
    let mut objective = |u: &[f64]| -> f64 {
        let cdf = positive_cdf_many(&xs, &decode(u));
        if cdf.iter().any(|c| !c.is_finite()) {
            return 1e6;
        }
        cdf.iter().zip(targets).map(|(c, t)| (c - t.cum_prob).powi(2)).sum()
    };

    let starts = [
        NigParams { tail: 1.0, asym: 0.8, loc: 0.5, scale: 0.5 },
        NigParams { tail: 0.5, asym: 0.45, loc: 0.3, scale: 0.3 },
        NigParams { tail: 2.0, asym: 1.5, loc: 0.8, scale: 1.0 },
        NigParams { tail: 3.0, asym: 0.0, loc: 1.0, scale: 1.0 },
    ];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    for s in &starts {
        let (mut u, mut v, e) = nelder_mead(&mut objective, &encode(s), 0.5, 1500, 1e-14);
        evaluations += e;
        // restart from the incumbent to escape a collapsed simplex
        let (u2, v2, e2) = nelder_mead(&mut objective, &u, 0.1, 800, 1e-14);
        evaluations += e2;
        if v2 < v {
            u = u2;
            v = v2;
        }
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((u, v));
        }
        if max_mismatch(&decode(&best.as_ref().unwrap().0), targets) < 1e-5 {
            break;
        }
    }
    let (u, _) = best.expect("at least one start");
    let params = decode(&u);
    let residual = max_mismatch(&params, targets);
    if !(residual <= CALIBRATION_TOLERANCE) {
        return Err(OutageError::NonConvergence { residual });
    }
    Ok(Calibration { params, residual, evaluations })
}

/// Equal-width histogram over `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

pub const MIN_FIT_SAMPLES: usize = 100;

/// Sum over bins of (empirical density − model density at bin center)², both
/// densities normalized to integrate to one over the binned range.
pub fn evaluate_fit_sse(samples: &[f64], params: &NigParams<f64>, spec: HistogramSpec) -> Result<f64, OutageError> {
    if spec.bins == 0 || !(spec.hi > spec.lo) || !spec.lo.is_finite() || !spec.hi.is_finite() {
        return Err(OutageError::EmptyBins);
    }
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(OutageError::InsufficientSamples { got: samples.len(), need: MIN_FIT_SAMPLES });
    }
    let width = (spec.hi - spec.lo) / spec.bins as f64;
    let mut counts = vec![0usize; spec.bins];
    let mut inside = 0usize;
    for &s in samples {
        if s >= spec.lo && s < spec.hi {
            let i = (((s - spec.lo) / width) as usize).min(spec.bins - 1);
            counts[i] += 1;
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(OutageError::InsufficientSamples { got: 0, need: 1 });
    }
    let model: Vec<f64> = (0..spec.bins).map(|i| nig_pdf(spec.lo + (i as f64 + 0.5) * width, params)).collect();
    let model_mass: f64 = model.iter().sum::<f64>() * width;
    if !(model_mass > 0.0) {
        return Err(OutageError::EmptyBins);
    }
    Ok(counts
        .iter()
        .zip(&model)
        .map(|(&c, &m)| {
            let emp = c as f64 / (inside as f64 * width);
            (emp - m / model_mass).powi(2)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::nig::{positive_cdf, sample_outage_duration};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nelder_mead_minimizes_rosenbrock() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, v, _) = nelder_mead(&mut f, &[-1.2, 1.0], 0.5, 5000, 1e-16);
        assert!(v < 1e-8, "{v}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn round_trip_known_params() {
        let truth = NigParams::new(1.2, 0.9, 0.6, 0.4).unwrap();
        let targets: Vec<QuantileTarget> =
            [0.3, 0.8, 1.5, 3.0].iter().map(|&v| QuantileTarget::new(v, positive_cdf(v, &truth))).collect();
        let cal = calibrate_nig(&targets).unwrap();
        for t in &targets {
            assert!((positive_cdf(t.value_s, &cal.params) - t.cum_prob).abs() < 1e-3);
        }
    }

    #[test]
    fn non_monotone_request_fails() {
        let targets = [QuantileTarget::new(1.0, 0.6), QuantileTarget::new(2.0, 0.3), QuantileTarget::new(3.0, 0.9)];
        assert!(matches!(calibrate_nig(&targets), Err(OutageError::NonConvergence { .. })));
    }

    #[test]
    fn too_few_targets_rejected() {
        let targets = [QuantileTarget::new(1.0, 0.6), QuantileTarget::new(2.0, 0.8)];
        assert!(matches!(calibrate_nig(&targets), Err(OutageError::InvalidTargets(_))));
    }

    fn draws(p: &NigParams<f64>, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| sample_outage_duration(p, &mut rng)).collect()
    }

    const SPEC: HistogramSpec = HistogramSpec { lo: 0.0, hi: 10.0, bins: 50 };

    #[test]
    fn self_consistent_fit_has_small_sse() {
        let p = NigParams::default();
        let sse = evaluate_fit_sse(&draws(&p, 100_000, 4), &p, SPEC).unwrap();
        assert!(sse < 0.05, "{sse}");
    }

    #[test]
    fn constant_samples_are_gross_mismatch() {
        let sse = evaluate_fit_sse(&vec![1.3; 1000], &NigParams::default(), SPEC).unwrap();
        assert!(sse >= 1.0, "{sse}");
    }

    #[test]
    fn shifted_samples_score_worse() {
        let p = NigParams::default();
        let shifted = NigParams { loc: p.loc + 2.0, ..p };
        let own = evaluate_fit_sse(&draws(&p, 100_000, 5), &p, SPEC).unwrap();
        let other = evaluate_fit_sse(&draws(&shifted, 100_000, 5), &p, SPEC).unwrap();
        assert!(other > own, "{other} vs {own}");
    }

    #[test]
    fn degenerate_bins_rejected() {
        let s = vec![1.0; 200];
        let p = NigParams::default();
        assert_eq!(evaluate_fit_sse(&s, &p, HistogramSpec { lo: 1.0, hi: 1.0, bins: 10 }), Err(OutageError::EmptyBins));
        assert_eq!(evaluate_fit_sse(&s, &p, HistogramSpec { lo: 0.0, hi: 1.0, bins: 0 }), Err(OutageError::EmptyBins));
        assert!(matches!(evaluate_fit_sse(&s[..10], &p, SPEC), Err(OutageError::InsufficientSamples { .. })));
    }
}
