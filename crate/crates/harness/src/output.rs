//! File output: CSV time series, JSON reports, gain tables.

use std::fs;
use std::path::{Path, PathBuf};

use flexcable::control::GainArtifact;
use flexcable::GainTable;
use serde::Serialize;

use crate::error::{io_err, HarnessError, Result};
use crate::multi::MultiPlan;
use crate::plan::Plan;
use crate::sim::RunRecord;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(HarnessError::Config(format!(
                "row of {} values for {} columns",
                r.len(),
                header.len()
            )));
        }
        w.write_record(r.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Header and numeric rows of a CSV file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| HarnessError::Config(format!("{}: bad number '{s}': {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn write_plan(dir: &Path, plan: &Plan, links: usize) -> Result<PathBuf> {
    let path = dir.join("plan.csv");
    let rows: Vec<Vec<f64>> = plan
        .points
        .iter()
        .zip(&plan.residuals)
        .map(|(dp, &r)| Plan::row(dp, r))
        .collect();
    write_csv(&path, &Plan::header(links), &rows)?;
    Ok(path)
}

pub fn write_multi_plan(dir: &Path, plan: &MultiPlan) -> Result<(PathBuf, PathBuf)> {
    let csv = dir.join("multi_plan.csv");
    let json = dir.join("multi_report.json");
    write_csv(&csv, &plan.header, &plan.rows)?;
    write_json(&json, &plan.report)?;
    Ok((csv, json))
}

/// Paths written for one trial.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub series: PathBuf,
    pub summary: PathBuf,
    pub snapshots: Option<PathBuf>,
}

fn file_stem(trial: &str) -> String {
    let clean: String = trial
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("trial_{clean}")
}

pub fn write_run(dir: &Path, record: &RunRecord, links: usize) -> Result<RunFiles> {
    let stem = file_stem(&record.summary.trial);
    let series = dir.join(format!("{stem}.csv"));
    let summary = dir.join(format!("{stem}.json"));
    let rows: Vec<Vec<f64>> = record.rows.iter().map(|r| r.values()).collect();
    write_csv(&series, &crate::sim::RunRow::header(links), &rows)?;
    write_json(&summary, &record.summary)?;
    let snapshots = if record.snapshots.is_empty() {
        None
    } else {
        let p = dir.join(format!("{stem}_snapshots.json"));
        write_json(&p, &record.snapshots)?;
        Some(p)
    };
    Ok(RunFiles {
        series,
        summary,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GainFormat {
    Bin,
    Json,
}

impl GainFormat {
    /// JSON for `.json` paths, binary otherwise.
    pub fn from_path(path: &Path) -> Self {
        if path.extension().is_some_and(|e| e == "json") {
            Self::Json
        } else {
            Self::Bin
        }
    }
}

pub fn write_gains(path: &Path, table: &GainTable, format: GainFormat) -> Result<()> {
    ensure_parent(path)?;
    match format {
        GainFormat::Bin => fs::write(path, table.to_bytes()).map_err(io_err(path)),
        GainFormat::Json => write_json(path, &table.to_artifact()),
    }
}

pub fn read_gains(path: &Path) -> Result<GainTable> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let table = match GainFormat::from_path(path) {
        GainFormat::Bin => GainTable::from_bytes(&bytes)?,
        GainFormat::Json => {
            let a: GainArtifact = serde_json::from_slice(&bytes)?;
            GainTable::from_artifact(&a)?
        }
    };
    Ok(table)
}
