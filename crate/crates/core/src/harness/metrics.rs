//! Metrics files.
//!
//! An experiment directory holds `trace.csv` (one row per epoch per
//! replicate), `summary.json` and, for crossbar scenarios, one state dump
//! per replicate and layer under `crossbars/`. A sweep directory holds
//! `sweep.csv`, `sweep.json` and one experiment directory per point.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepResult;
use super::{ExperimentResult, ExperimentSummary};
use crate::error::{Error, Result};

/// Version of the JSON summary and CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replicate: usize,
    pub epoch: usize,
    pub train_mse: f64,
    pub test_error: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(format!("{}: {e}", path.display())))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the trace, summary and crossbar dumps of one experiment into `dir`.
pub fn emit_metrics(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows = result.traces.iter().enumerate().flat_map(|(r, t)| {
        t.epochs.iter().map(move |e| TraceRow {
            replicate: r,
            epoch: e.epoch,
            train_mse: e.train_mse,
            test_error: e.test_error,
        })
    });
    write_csv(&dir.join("trace.csv"), rows)?;
    write_json(&dir.join("summary.json"), &result.summary)?;
    if result.networks.iter().any(Option::is_some) {
        let xdir = dir.join("crossbars");
        fs::create_dir_all(&xdir)?;
        for (r, net) in result.networks.iter().enumerate() {
            for (k, layer) in net.iter().flat_map(|n| n.layers.iter().enumerate()) {
                layer.xbar.save(&xdir.join(format!("r{r}-layer{k}.txt")))?;
            }
        }
    }
    Ok(())
}

/// Writes a sweep table plus one experiment directory per point.
pub fn emit_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("sweep.csv"), &result.table.rows)?;
    write_json(&dir.join("sweep.json"), &result.table)?;
    for (k, point) in result.points.iter().enumerate() {
        emit_metrics(point, &dir.join(format!("point-{k}")))?;
    }
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<ExperimentSummary> {
    let summary: ExperimentSummary = serde_json::from_str(&fs::read_to_string(path)?)?;
    if summary.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{}: summary schema {} is not the supported version {SCHEMA_VERSION}",
            path.display(),
            summary.schema_version
        )));
    }
    Ok(summary)
}
