//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any FAIL.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sara_core::abr::{harmonic_mean, robust_mpc_select, AbrInputs, AbrKind, AbrParams, DynamicMode};
use sara_core::harness::{run_matrix, summarize, write_outputs, ExperimentConfig, Report};
use sara_core::network::{synth_bandwidth, NetworkTrace};
use sara_core::outage::{default_p_slot, sample_outage_duration, synthesize_outage_trace, OccurrenceParams, OutageEvent, DEFAULT_NIG};
use sara_core::player::{
    buffer_health_ok, chunk_qoe, latency_penalty, max_downloadable_chunks, quality, rebuffer_duration, OutagePrediction, PlayerState, QoEParams,
    VideoManifest,
};
use sara_core::predictor::{NullPredictor, OraclePredictor};
use sara_core::sara::{buffer_pressure_offset, candidate_score, run_session, sara_optimize, ControlDecision, PsoParams, ScoreContext, SessionSetup};

const LADDER: [f64; 4] = [1000.0, 2500.0, 5000.0, 8000.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(n: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = budget.is_none_or(|b| took <= b);
    let pass = out.pass && in_time;
    let budget_note = budget.map_or(String::new(), |b| format!(", budget {:.0}s", b.as_secs_f64()));
    println!("[{}] criterion {n}: {name} ({}) [{:.2}s{budget_note}]", if pass { "PASS" } else { "FAIL" }, out.detail, took.as_secs_f64());
    pass
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn formula_suite() -> Outcome {
    let lin = QoEParams::<f64>::linear();
    let log = QoEParams::<f64>::log();
    let o21 = OutagePrediction::at(2.0, 1.0);
    let o12 = OutagePrediction::at(1.0, 2.0);
    let cases: Vec<(&str, bool)> = vec![
        ("log quality of top rung", close(quality(&log, &LADDER, 8000.0).unwrap(), 8f64.ln())),
        ("theta 8000/3/2500", max_downloadable_chunks(8000.0, 3.0, 2500.0, 0.5) == 6),
        ("theta 1000/2/8000", max_downloadable_chunks(1000.0, 2.0, 8000.0, 0.5) == 0),
        ("healthy buffer", buffer_health_ok(3.5, 4, 0.5, 1.0, &o21, 2.0)),
        ("unhealthy buffer", !buffer_health_ok(2.0, 4, 0.5, 1.0, &o21, 2.0)),
        ("rebuffer at 1x", close(rebuffer_duration(1.0, 2, 0.5, 1.0, &o12, 2.0), 3.0)),
        ("rebuffer at 0.95x", close(rebuffer_duration(1.0, 2, 0.5, 0.95, &o12, 2.0), 5.0 - 2.0 / 0.95)),
        ("latency penalty", close(latency_penalty(4.5, 3.0), 1.5)),
        ("qoe with one second stalled", close(chunk_qoe(&lin, &LADDER, 8000.0, 8000.0, 1.0, 1.0, 1.0, 3.0).unwrap(), 8.0 - 4.33)),
        ("qoe with a down-switch", close(chunk_qoe(&lin, &LADDER, 2500.0, 5000.0, 1.0, 1.0, 0.0, 3.0).unwrap(), 0.0)),
        ("offset C=1 o_t=2", close(buffer_pressure_offset(1.0, &OutagePrediction::at(2.0, 1.0)), -0.2)),
        ("offset C=9 o_t=10", close(buffer_pressure_offset(9.0, &OutagePrediction::at(10.0, 1.0)), -1.0 / 9.0)),
    ];
    let failed: Vec<&str> = cases.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome { pass: failed.is_empty(), detail: if failed.is_empty() { format!("{} examples exact", cases.len()) } else { format!("failed: {}", failed.join(", ")) } }
}

fn distribution_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_outage_duration(&DEFAULT_NIG, &mut rng)).collect();
    let below2 = draws.iter().filter(|&&d| d < 2.0).count() as f64 / n as f64;
    let above5 = draws.iter().filter(|&&d| d > 5.0).count() as f64 / n as f64;

    let occ = OccurrenceParams::flat(default_p_slot());
    let windows = 10_000;
    let hit = (0..windows).filter(|_| !synthesize_outage_trace(&occ, &DEFAULT_NIG, 0.0, 3600.0, &mut rng).is_empty()).count() as f64 / windows as f64;

    let pass = (below2 - 0.8733).abs() <= 0.02 && (above5 - 0.0273).abs() <= 0.01 && (hit - 0.80).abs() <= 0.02;
    Outcome { pass, detail: format!("P(d<2)={below2:.4}, P(d>5)={above5:.4}, P(outage in 60 min)={hit:.4}") }
}

struct RandomState {
    state: PlayerState<f64>,
    history: Vec<f64>,
    errors: Vec<f64>,
    prediction: OutagePrediction<f64>,
    kind: AbrKind,
}

fn random_state(rng: &mut ChaCha8Rng, i: usize) -> RandomState {
    let buffer_s = rng.random_range(0.0..6.0);
    let speed = rng.random_range(0.95..1.03);
    let state = PlayerState {
        buffer_s,
        ltb_s: buffer_s + rng.random_range(0.3..2.5),
        speed,
        prev_speed: speed,
        prev_bitrate_kbps: LADDER[rng.random_range(0..LADDER.len())],
        rebuffer_total_s: 0.0,
        wall_clock_s: 0.0,
        next_chunk: 0,
    };
    let level = rng.random_range(1500.0..14000.0);
    let history = (0..5).map(|_| level * rng.random_range(0.6..1.4)).collect();
    let errors = (0..5).map(|_| rng.random_range(0.0..0.4)).collect();
    let prediction = if rng.random_bool(0.75) { OutagePrediction::at(rng.random_range(0.0..20.0), rng.random_range(0.3..6.0)) } else { OutagePrediction::none() };
    RandomState { state, history, errors, prediction, kind: AbrKind::BASELINES[i % 4] }
}

fn pso_vs_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let abr = AbrParams::live_defaults(&LADDER, 0.5);
    let qoe = QoEParams::linear();
    let pso = PsoParams { neutral_gate: false, ..PsoParams::default() };
    let mut worst_gap = f64::NEG_INFINITY;
    let mut failures = 0;
    for i in 0..20 {
        let rs = random_state(&mut rng, i);
        let inputs = AbrInputs {
            buffer_s: rs.state.buffer_s,
            throughput_kbps: *rs.history.last().unwrap(),
            throughput_scale: 1.0,
            throughput_history: &rs.history,
            prediction_errors: &rs.errors,
            prev_bitrate_kbps: rs.state.prev_bitrate_kbps,
            ladder: &LADDER,
            chunk_s: 0.5,
            ltb_s: rs.state.ltb_s,
        };
        let ctx = ScoreContext::new(&rs.state, &inputs, &rs.prediction, rs.kind, &abr, &qoe, DynamicMode::Throughput, &pso);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..=20 {
            for b in 0..=20 {
                for c in 0..=16 {
                    let d = ControlDecision::new(a as f64 / 20.0, b as f64 / 20.0, 0.95 + c as f64 * 0.005);
                    let s = candidate_score(&d, &ctx).unwrap();
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        let got = sara_optimize(&ctx, &pso, &mut ChaCha8Rng::seed_from_u64(1000 + i as u64)).unwrap().score;
        let gap = (hi - got) / (hi - lo).max(f64::MIN_POSITIVE);
        worst_gap = worst_gap.max(if hi > lo { gap } else { hi - got });
        if got < hi - 0.01 * (hi - lo) {
            failures += 1;
        }
    }
    Outcome { pass: failures == 0, detail: format!("{failures}/20 below grid optimum - 1% of range; worst shortfall {:.4} of range", worst_gap.max(0.0)) }
}

fn brute_force_mpc(inputs: &AbrInputs<'_, f64>, horizon: usize, qoe: &QoEParams<f64>) -> f64 {
    let worst = inputs.prediction_errors.iter().rev().take(5).fold(0.0f64, |a, e| a.max(e.abs()));
    let recent = &inputs.throughput_history[inputs.throughput_history.len().saturating_sub(5)..];
    let est = harmonic_mean(recent).unwrap() * inputs.throughput_scale / (1.0 + worst);
    let q = |b: f64| quality(qoe, inputs.ladder, b).unwrap();
    let m = inputs.ladder.len();
    let mut best = (f64::NEG_INFINITY, inputs.ladder[0]);
    for code in 0..m.pow(horizon as u32) {
        let plan: Vec<usize> = (0..horizon).rev().map(|k| code / m.pow(k as u32) % m).collect();
        let mut steps = Vec::with_capacity(horizon);
        let (mut buf, mut prev) = (inputs.buffer_s, inputs.prev_bitrate_kbps);
        for &j in &plan {
            let b = inputs.ladder[j];
            let dl = b * inputs.chunk_s / est;
            let stall = (dl - buf).max(0.0);
            buf = (buf - dl).max(0.0) + inputs.chunk_s;
            steps.push(q(b) - qoe.omega * stall - qoe.rho * (q(b) - q(prev)).abs());
            prev = b;
        }
        let total = steps.iter().rev().fold(0.0, |acc, s| s + acc);
        if total > best.0 {
            best = (total, inputs.ladder[plan[0]]);
        }
    }
    best.1
}

fn mpc_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ladder = [1000.0, 3000.0, 6000.0];
    let mut mismatches = 0;
    for i in 0..100 {
        let qoe = if i % 2 == 0 { QoEParams::linear() } else { QoEParams::log() };
        let history: Vec<f64> = (0..rng.random_range(1..8)).map(|_| rng.random_range(500.0..12000.0)).collect();
        let errors: Vec<f64> = (0..rng.random_range(0..8)).map(|_| rng.random_range(0.0..0.6)).collect();
        let inputs = AbrInputs {
            buffer_s: rng.random_range(0.0..4.0),
            throughput_kbps: *history.last().unwrap(),
            throughput_scale: rng.random_range(0.5..1.0),
            throughput_history: &history,
            prediction_errors: &errors,
            prev_bitrate_kbps: ladder[rng.random_range(0..3)],
            ladder: &ladder,
            chunk_s: 0.5,
            ltb_s: 3.0,
        };
        if robust_mpc_select(&inputs, 3, &qoe).unwrap() != brute_force_mpc(&inputs, 3, &qoe) {
            mismatches += 1;
        }
    }
    Outcome { pass: mismatches == 0, detail: format!("{mismatches}/100 mismatches") }
}

fn baseline_equivalence() -> Outcome {
    let m = VideoManifest::standard(180.0);
    let abr = AbrParams::live_defaults(&m.ladder_kbps, m.chunk_s);
    let qoe = QoEParams::linear();
    let pso = PsoParams::default();
    let mut diffs = Vec::new();
    let mut stalled = 0;
    for seed in 0..3u64 {
        let samples = synth_bandwidth(25_000.0, 0.3, 5.0, 400.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let trace = NetworkTrace::new(samples, Vec::new(), 2.0).unwrap();
        for kind in AbrKind::BASELINES {
            let play = |sara: Option<&PsoParams<f64>>| {
                let setup = SessionSetup { manifest: &m, trace: &trace, kind, abr: &abr, qoe: &qoe, sara };
                run_session(&setup, &mut NullPredictor, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
            };
            let bare = play(None);
            stalled += usize::from(bare.rebuffer_total_s() > 0.0);
            if bare.bitrates() != play(Some(&pso)).bitrates() {
                diffs.push(format!("{kind}/seed{seed}"));
            }
        }
    }
    let pass = diffs.is_empty() && stalled == 0;
    Outcome { pass, detail: format!("12 sessions, {} differ, {stalled} bare runs left target latency", diffs.len()) }
}

fn outage_rescue() -> Outcome {
    let m = VideoManifest::standard(120.0);
    let trace = NetworkTrace::new(vec![(0.0, 20_000.0)], vec![OutageEvent { onset_s: 60.0, duration_s: 2.0 }], 2.0).unwrap();
    let abr = AbrParams::live_defaults(&m.ladder_kbps, m.chunk_s);
    let qoe = QoEParams::linear();
    let pso = PsoParams::default();
    let play = |sara: Option<&PsoParams<f64>>| {
        let setup = SessionSetup { manifest: &m, trace: &trace, kind: AbrKind::BBA, abr: &abr, qoe: &qoe, sara };
        let mut oracle = OraclePredictor::new(trace.outages().to_vec(), 120.0);
        run_session(&setup, &mut oracle, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    };
    let bare = play(None).rebuffer_total_s();
    let sara = play(Some(&pso)).rebuffer_total_s();
    Outcome { pass: sara == 0.0 && bare > 0.0, detail: format!("bare BBA rebuffers {bare:.3}s, SARA+BBA {sara:.3}s") }
}

fn ensemble_config(predictor: &str, seeds: usize) -> ExperimentConfig {
    let text = format!(
        "[manifest]\nduration_s = 600.0\n[abr]\nalgorithms = [\"bba\", \"bola\", \"robustmpc\", \"dynamic\"]\n\
         [predictor]\nkind = \"{predictor}\"\n[run]\nseed_count = {seeds}\nwrite_chunk_logs = false\n"
    );
    ExperimentConfig::from_toml_str(&text, Path::new(".")).unwrap()
}

fn ensemble(predictor: &str) -> Report {
    let cfg = ensemble_config(predictor, 50);
    summarize(&run_matrix(&cfg).unwrap().summaries).unwrap()
}

fn headline_direction() -> Outcome {
    let oracle = ensemble("oracle");
    let noisy = ensemble("noisy");
    let o = &oracle.overall;
    let n = &noisy.overall;
    let per_abr: Vec<String> = oracle
        .per_abr
        .iter()
        .map(|a| format!("{} {:.1}%/{:+.2}%", a.abr, a.stats.rebuffer_time_reduction_pct, a.stats.bitrate_change_pct))
        .collect();
    let pass = o.rebuffer_time_reduction_pct >= 20.0 && o.bitrate_change_pct >= -2.0 && o.ltb_change_pct <= 2.0 && n.rebuffer_time_reduction_pct > 0.0;
    Outcome {
        pass,
        detail: format!(
            "oracle: rebuffer -{:.2}%, bitrate {:+.2}%, ltb {:+.2}% [{}]; noisy: rebuffer -{:.2}%",
            o.rebuffer_time_reduction_pct,
            o.bitrate_change_pct,
            o.ltb_change_pct,
            per_abr.join(", "),
            n.rebuffer_time_reduction_pct
        ),
    }
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let text = "[manifest]\nduration_s = 600.0\n[predictor]\nkind = \"noisy\"\n[run]\nseed_count = 4\n";
    let cfg = ExperimentConfig::from_toml_str(text, Path::new(".")).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_outputs(&cfg, &run_matrix(&cfg).unwrap(), d.path()).unwrap();
    }
    let (a, b) = (read_tree(dirs[0].path()), read_tree(dirs[1].path()));
    Outcome { pass: !a.is_empty() && a == b, detail: format!("{} files compared", a.len()) }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        check(1, "formula unit suite", Some(secs(1)), formula_suite),
        check(2, "distribution fidelity", Some(secs(30)), distribution_fidelity),
        check(3, "PSO vs 21x21x17 grid", Some(secs(60)), pso_vs_grid),
        check(4, "RobustMPC vs brute force", Some(secs(10)), mpc_equivalence),
        check(5, "baseline equivalence", None, baseline_equivalence),
        check(6, "constructed-outage rescue", None, outage_rescue),
        check(7, "50-seed headline direction", Some(secs(600)), headline_direction),
        check(8, "determinism", None, determinism),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
