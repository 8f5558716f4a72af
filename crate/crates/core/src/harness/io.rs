use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::run::RunSummary;
use super::HarnessError;
use crate::outage::{OutageEvent, QuantileTarget};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Parse { path: path.to_path_buf(), message: e.to_string() }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_path(path).map_err(|e| parse_err(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| parse_err(path, e))).collect()
}

#[derive(Deserialize)]
struct BandwidthRow {
    t_s: f64,
    bandwidth_kbps: f64,
}

#[derive(Deserialize)]
struct OutageRow {
    onset_s: f64,
    duration_s: f64,
}

#[derive(Deserialize)]
struct TargetRow {
    value_s: f64,
    cum_prob: f64,
}

/// `t_s,bandwidth_kbps`
pub fn read_bandwidth_csv(path: &Path) -> Result<Vec<(f64, f64)>, HarnessError> {
    Ok(read_rows::<BandwidthRow>(path)?.into_iter().map(|r| (r.t_s, r.bandwidth_kbps)).collect())
}

/// `onset_s,duration_s`
pub fn read_outage_csv(path: &Path) -> Result<Vec<OutageEvent<f64>>, HarnessError> {
    let events: Vec<_> = read_rows::<OutageRow>(path)?.into_iter().map(|r| OutageEvent { onset_s: r.onset_s, duration_s: r.duration_s }).collect();
    crate::outage::validate_events(&events).map_err(|e| parse_err(path, e))?;
    Ok(events)
}

/// `value_s,cum_prob`
pub fn read_targets_csv(path: &Path) -> Result<Vec<QuantileTarget>, HarnessError> {
    Ok(read_rows::<TargetRow>(path)?.into_iter().map(|r| QuantileTarget { value_s: r.value_s, cum_prob: r.cum_prob }).collect())
}

pub fn write_bandwidth_csv(path: &Path, samples: &[(f64, f64)]) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "t_s,bandwidth_kbps").map_err(io_err(path))?;
    for (t, b) in samples {
        writeln!(w, "{t},{b}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_outage_csv(path: &Path, events: &[OutageEvent<f64>]) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "onset_s,duration_s").map_err(io_err(path))?;
    for e in events {
        writeln!(w, "{},{}", e.onset_s, e.duration_s).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_summary_csv(path: &Path, rows: &[RunSummary]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| parse_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<RunSummary>, HarnessError> {
    read_rows(path)
}
