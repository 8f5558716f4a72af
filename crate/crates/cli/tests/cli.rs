use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sara_core::harness::CONFIG_REFERENCE;

fn sara_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sara-sim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"
[manifest]
duration_s = 30.0

[trace]
p_slot = 0.3

[abr]
algorithms = ["bba"]

[run]
seed_count = 2
output_dir = "out"
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn help_lists_every_config_key() {
    for args in [&["--help"][..], &["run", "--help"], &["synth-trace", "--help"]] {
        let out = stdout(&sara_sim(args));
        assert!(out.contains(CONFIG_REFERENCE.trim_end()), "{args:?}");
    }
    let top = stdout(&sara_sim(&["--help"]));
    for cmd in ["run", "summarize", "synth-trace", "calibrate-nig"] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn calibrate_nig_recovers_the_shipped_defaults() {
    let targets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/nig_targets.csv");
    let out = sara_sim(&["calibrate-nig", "--targets", targets.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let tail: f64 = text.lines().find_map(|l| l.strip_prefix("nig_tail = ")).unwrap().parse().unwrap();
    assert!((tail - sara_core::outage::DEFAULT_NIG.tail).abs() < 1e-3, "{text}");
}

#[test]
fn run_then_summarize_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = sara_sim(&["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(out_dir.join("chunks/bba_sara_seed1.csv").exists());
    fs::remove_file(out_dir.join("report.txt")).unwrap();
    let again = sara_sim(&["summarize", "--dir", out_dir.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(fs::read_to_string(out_dir.join("report.txt")).unwrap(), report);
}

#[test]
fn synth_trace_writes_one_pair_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let traces = dir.path().join("traces");
    let out = sara_sim(&["synth-trace", "--config", &cfg, "--out", traces.to_str().unwrap()]);
    assert!(out.status.success());
    for seed in 0..2 {
        let bw = fs::read_to_string(traces.join(format!("bandwidth_seed{seed}.csv"))).unwrap();
        assert!(bw.starts_with("t_s,bandwidth_kbps"));
        let outages = fs::read_to_string(traces.join(format!("outages_seed{seed}.csv"))).unwrap();
        assert!(outages.starts_with("onset_s,duration_s"));
    }
    // replaying the written traces gives the same sessions as synthesizing them
    let replay = "[manifest]\nduration_s = 30.0\n[trace]\nbandwidth_file = \"traces/bandwidth_seed1.csv\"\noutage_file = \"traces/outages_seed1.csv\"\n\
         [abr]\nalgorithms = [\"bba\"]\n[run]\nseeds = [1]\noutput_dir = \"replay\"\n";
    let synth = TINY.replace("seed_count = 2", "seeds = [1]").replace("\"out\"", "\"synth\"");
    fs::write(dir.path().join("replay.toml"), replay).unwrap();
    fs::write(dir.path().join("synth.toml"), synth).unwrap();
    for name in ["replay", "synth"] {
        let p = dir.path().join(format!("{name}.toml"));
        assert!(sara_sim(&["run", "--config", p.to_str().unwrap()]).status.success());
    }
    let a = fs::read(dir.path().join("replay/summary.csv")).unwrap();
    let b = fs::read(dir.path().join("synth/summary.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sara]\nparticles = 0\n");
    let out = sara_sim(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sara.particles"));
}
