use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{HarnessError, RunSummary};

/// Paired SARA-vs-bare deltas. Percentages are means of per-pair
/// percentages; NaN when no pair qualifies.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub pairs: usize,
    /// Pairs whose bare run never stalled; excluded from the rebuffer-time reduction.
    pub already_zero_time: usize,
    /// Pairs whose bare run had no stall events; excluded from the event reduction.
    pub already_zero_events: usize,
    pub rebuffer_time_reduction_pct: f64,
    pub rebuffer_event_reduction_pct: f64,
    pub bitrate_change_pct: f64,
    pub ltb_change_pct: f64,
    /// Difference in the share of wall time off 1x (SARA minus bare).
    pub speed_deviation_delta: f64,
    pub qoe_lin_delta: f64,
    pub qoe_log_delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbrComparison {
    pub abr: String,
    pub stats: Comparison,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub per_abr: Vec<AbrComparison>,
    /// Unweighted mean of the per-ABR figures; `pairs` and the tallies are sums.
    pub overall: Comparison,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().filter(|x| !x.is_nan()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn pct_change(bare: f64, sara: f64) -> f64 {
    if bare == 0.0 {
        f64::NAN
    } else {
        100.0 * (sara - bare) / bare
    }
}

fn compare(pairs: &[(&RunSummary, &RunSummary)]) -> Comparison {
    let reduction = |f: fn(&RunSummary) -> f64| mean(pairs.iter().map(|(b, s)| if f(b) > 0.0 { 100.0 * (f(b) - f(s)) / f(b) } else { f64::NAN }));
    Comparison {
        pairs: pairs.len(),
        already_zero_time: pairs.iter().filter(|(b, _)| b.rebuffer_total_s <= 0.0).count(),
        already_zero_events: pairs.iter().filter(|(b, _)| b.rebuffer_events == 0).count(),
        rebuffer_time_reduction_pct: reduction(|r| r.rebuffer_total_s),
        rebuffer_event_reduction_pct: reduction(|r| r.rebuffer_events as f64),
        bitrate_change_pct: mean(pairs.iter().map(|(b, s)| pct_change(b.mean_bitrate_kbps, s.mean_bitrate_kbps))),
        ltb_change_pct: mean(pairs.iter().map(|(b, s)| pct_change(b.mean_ltb_s, s.mean_ltb_s))),
        speed_deviation_delta: mean(pairs.iter().map(|(b, s)| s.speed_deviation_fraction - b.speed_deviation_fraction)),
        qoe_lin_delta: mean(pairs.iter().map(|(b, s)| s.qoe_lin - b.qoe_lin)),
        qoe_log_delta: mean(pairs.iter().map(|(b, s)| s.qoe_log - b.qoe_log)),
    }
}

/// Pairs bare and SARA runs by (ABR, seed) and aggregates per ABR.
pub fn summarize(rows: &[RunSummary]) -> Result<Report, HarnessError> {
    let mut order: Vec<&str> = Vec::new();
    let mut slots: BTreeMap<(usize, u64), [Option<&RunSummary>; 2]> = BTreeMap::new();
    for r in rows {
        let ai = match order.iter().position(|a| *a == r.abr) {
            Some(i) => i,
            None => {
                order.push(&r.abr);
                order.len() - 1
            }
        };
        let vi = match r.variant.as_str() {
            "bare" => 0,
            "sara" => 1,
            other => return Err(HarnessError::Parse { path: "summary".into(), message: format!("unknown variant {other:?}") }),
        };
        let slot = &mut slots.entry((ai, r.seed)).or_default()[vi];
        if slot.is_some() {
            return Err(HarnessError::DuplicateRun { abr: r.abr.clone(), variant: r.variant.clone(), seed: r.seed });
        }
        *slot = Some(r);
    }
    let mut per_abr: Vec<(String, Vec<(&RunSummary, &RunSummary)>)> = order.iter().map(|a| (a.to_string(), Vec::new())).collect();
    for ((ai, _), pair) in &slots {
        match pair {
            [Some(b), Some(s)] => per_abr[*ai].1.push((b, s)),
            [Some(r), None] | [None, Some(r)] => {
                return Err(HarnessError::UnpairedRuns { abr: r.abr.clone(), variant: r.variant.clone(), seed: r.seed })
            }
            [None, None] => unreachable!(),
        }
    }
    let per_abr: Vec<AbrComparison> = per_abr.into_iter().map(|(abr, pairs)| AbrComparison { abr, stats: compare(&pairs) }).collect();
    let over = |f: fn(&Comparison) -> f64| mean(per_abr.iter().map(|a| f(&a.stats)));
    let overall = Comparison {
        pairs: per_abr.iter().map(|a| a.stats.pairs).sum(),
        already_zero_time: per_abr.iter().map(|a| a.stats.already_zero_time).sum(),
        already_zero_events: per_abr.iter().map(|a| a.stats.already_zero_events).sum(),
        rebuffer_time_reduction_pct: over(|c| c.rebuffer_time_reduction_pct),
        rebuffer_event_reduction_pct: over(|c| c.rebuffer_event_reduction_pct),
        bitrate_change_pct: over(|c| c.bitrate_change_pct),
        ltb_change_pct: over(|c| c.ltb_change_pct),
        speed_deviation_delta: over(|c| c.speed_deviation_delta),
        qoe_lin_delta: over(|c| c.qoe_lin_delta),
        qoe_log_delta: over(|c| c.qoe_log_delta),
    };
    Ok(Report { per_abr, overall })
}

/// Empirical CDF as (value, cumulative fraction); tied values collapse to
/// their last step, so the final point is always 1.
pub fn cdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (i, x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = p,
            _ => out.push((*x, p)),
        }
    }
    out
}

type Metric = (&'static str, fn(&RunSummary) -> f64);

/// One file per (metric, ABR, variant): `<metric>_<abr>_<variant>.csv`.
pub fn write_cdf_files(dir: &Path, rows: &[RunSummary]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    let metrics: [Metric; 3] = [
        ("rebuffer_s", |r| r.rebuffer_total_s),
        ("bitrate_kbps", |r| r.mean_bitrate_kbps),
        ("ltb_s", |r| r.mean_ltb_s),
    ];
    let mut groups: BTreeMap<(&str, &str), Vec<&RunSummary>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.abr, &r.variant)).or_default().push(r);
    }
    for ((abr, variant), runs) in &groups {
        for (metric, f) in &metrics {
            let values: Vec<f64> = runs.iter().map(|r| f(r)).collect();
            let mut text = format!("{metric},cum_frac\n");
            for (x, p) in cdf_points(&values) {
                writeln!(text, "{x},{p}").unwrap();
            }
            let path = dir.join(format!("{metric}_{abr}_{variant}.csv"));
            fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })?;
        }
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "n/a".into()
    } else {
        format!("{x:.2}")
    }
}

pub fn render_report(report: &Report) -> String {
    let mut s = String::new();
    s.push_str("# SARA vs bare, paired by (abr, seed).\n");
    s.push_str("# Reductions and changes are means of per-pair percentages.\n");
    s.push_str("# Pairs whose bare run had zero rebuffering are left out of the reduction\n");
    s.push_str("# and counted in zero_t / zero_ev. Overall = unweighted mean over ABRs.\n");
    s.push_str("# spd_dev = change in share of wall time off 1x (fraction points).\n");
    writeln!(
        s,
        "{:<10} {:>5} {:>6} {:>7} {:>10} {:>10} {:>9} {:>8} {:>8} {:>10} {:>10}",
        "abr", "pairs", "zero_t", "zero_ev", "rebuf_t_%", "rebuf_ev_%", "bitrate_%", "ltb_%", "spd_dev", "qoe_lin", "qoe_log"
    )
    .unwrap();
    let rows = report.per_abr.iter().map(|a| (a.abr.as_str(), &a.stats)).chain(std::iter::once(("overall", &report.overall)));
    for (name, c) in rows {
        writeln!(
            s,
            "{:<10} {:>5} {:>6} {:>7} {:>10} {:>10} {:>9} {:>8} {:>8} {:>10} {:>10}",
            name,
            c.pairs,
            c.already_zero_time,
            c.already_zero_events,
            fmt(c.rebuffer_time_reduction_pct),
            fmt(c.rebuffer_event_reduction_pct),
            fmt(c.bitrate_change_pct),
            fmt(c.ltb_change_pct),
            fmt(c.speed_deviation_delta),
            fmt(c.qoe_lin_delta),
            fmt(c.qoe_log_delta)
        )
        .unwrap();
    }
    s
}

pub fn write_report(path: &Path, report: &Report) -> Result<(), HarnessError> {
    fs::write(path, render_report(report)).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}
