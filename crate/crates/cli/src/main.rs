use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sara_core::harness::{
    build_trace, read_summary_csv, read_targets_csv, render_report, run_matrix, summarize, write_bandwidth_csv, write_outage_csv, write_outputs,
    ExperimentConfig, CONFIG_REFERENCE,
};
use sara_core::outage::calibrate_nig;

#[derive(Parser)]
#[command(name = "sara-sim", version, about = "Outage-aware live streaming simulator", after_help = CONFIG_REFERENCE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (ABR, variant, seed) session and write summary.csv, report.txt and CDFs.
    #[command(after_help = CONFIG_REFERENCE)]
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild report.txt from an existing summary.csv.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Write the bandwidth and outage traces for each configured seed.
    #[command(after_help = CONFIG_REFERENCE)]
    SynthTrace {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit NIG outage-duration parameters to a CSV of (value_s, cum_prob) targets.
    CalibrateNig {
        #[arg(long)]
        targets: PathBuf,
    },
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let result = run_matrix(&cfg)?;
    match write_outputs(&cfg, &result, &dir)? {
        Some(report) => print!("{}", render_report(&report)),
        None => println!("{} runs written; report needs both variants", result.summaries.len()),
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn summarize_dir(dir: &Path) -> Result<()> {
    let rows = read_summary_csv(&dir.join("summary.csv"))?;
    let report = summarize(&rows)?;
    let text = render_report(&report);
    std::fs::write(dir.join("report.txt"), &text).with_context(|| format!("writing {}", dir.join("report.txt").display()))?;
    print!("{text}");
    Ok(())
}

fn synth_trace(config: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for &seed in &cfg.seeds {
        let (trace, outages) = build_trace(&cfg, seed)?;
        write_bandwidth_csv(&out.join(format!("bandwidth_seed{seed}.csv")), trace.samples())?;
        write_outage_csv(&out.join(format!("outages_seed{seed}.csv")), &outages)?;
        println!("seed {seed}: {} bandwidth samples, {} outages", trace.samples().len(), outages.len());
    }
    Ok(())
}

fn calibrate(targets: &Path) -> Result<()> {
    let targets = read_targets_csv(targets)?;
    let fit = calibrate_nig(&targets)?;
    let p = fit.params;
    println!("nig_tail = {}", p.tail);
    println!("nig_asym = {}", p.asym);
    println!("nig_loc = {}", p.loc);
    println!("nig_scale = {}", p.scale);
    println!("# max |F - p| = {:e} after {} evaluations", fit.residual, fit.evaluations);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Summarize { dir } => summarize_dir(&dir),
        Command::SynthTrace { config, out } => synth_trace(&config, &out),
        Command::CalibrateNig { targets } => calibrate(&targets),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
