//! CSV and JSON emission of run and sweep results.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dynamics::Trajectory;
use crate::error::{HqrcError, Result};

use super::sweep::{aggregate, CellResult, GroupStats, SweepReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

const CELL_HEADER: [&str; 13] = [
    "config_hash",
    "seed",
    "params",
    "mode",
    "vpt",
    "vpt_steps",
    "censored",
    "overlap",
    "return_map_containment",
    "train_rmse",
    "reservoir_size",
    "wall_clock_s",
    "error",
];

fn params_label(c: &CellResult) -> String {
    c.params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per (config hash, seed).
pub fn write_cells_csv<W: Write>(cells: &[CellResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CELL_HEADER)?;
    for c in cells {
        let mut row = vec![c.config_hash.clone(), c.seed.to_string(), params_label(c)];
        match &c.summary {
            Some(s) => row.extend([
                serde_json::to_value(s.mode)?.as_str().unwrap_or_default().to_string(),
                s.vpt.to_string(),
                s.vpt_steps.to_string(),
                s.censored.to_string(),
                s.overlap.fraction_inside.to_string(),
                s.return_map_containment.to_string(),
                s.train_rmse.to_string(),
                s.reservoir_size.to_string(),
                format!("{:.3}", s.wall_clock_s),
                String::new(),
            ]),
            None => {
                row.extend(std::iter::repeat_n(String::new(), 9));
                row.push(c.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_groups_csv<W: Write>(groups: &[GroupStats], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "config_hash",
        "params",
        "runs",
        "failures",
        "censored",
        "mean",
        "q1",
        "median",
        "q3",
        "iqr",
        "min",
        "max",
        "best_seed",
    ])?;
    for g in groups {
        let params = g
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let mut row = vec![
            g.config_hash.clone(),
            params,
            g.runs.to_string(),
            g.failures.to_string(),
            g.censored.to_string(),
        ];
        row.extend([g.mean, g.q1, g.median, g.q3, g.iqr, g.min, g.max].map(|v| v.to_string()));
        row.push(g.best_seed.map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t`, truth components, predicted components (`truth_x`, `pred_x`, …);
/// time starts at `t0`.
pub fn write_forecast_csv<W: Write>(
    truth: &Trajectory,
    pred: &Trajectory,
    names: &[&str],
    t0: f64,
    writer: W,
) -> Result<()> {
    if truth.len() != pred.len() || truth.dim() != pred.dim() || names.len() != truth.dim() {
        return Err(HqrcError::usage("forecast and truth trajectories differ in shape"));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().map(|n| format!("truth_{n}")));
    header.extend(names.iter().map(|n| format!("pred_{n}")));
    w.write_record(&header)?;
    for (k, (a, b)) in truth.points.iter().zip(&pred.points).enumerate() {
        let mut row = vec![(t0 + k as f64 * truth.dt).to_string()];
        row.extend(a.iter().map(f64::to_string));
        row.extend(b.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json<W: Write>(report: &SweepReport, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, report)?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<SweepReport> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// Recompute group statistics from the stored cells (the stored groups are ignored).
pub fn reaggregate(report: &SweepReport) -> SweepReport {
    SweepReport {
        cells: report.cells.clone(),
        groups: aggregate(&report.cells),
    }
}

/// Write `<stem>.csv`, `<stem>_groups.csv` and/or `<stem>.json` into `dir`.
pub fn emit_report(report: &SweepReport, dir: &Path, stem: &str, formats: &[Format]) -> Result<Vec<PathBuf>> {
    if report.cells.is_empty() {
        return Err(HqrcError::usage("nothing to report"));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                let p = dir.join(format!("{stem}.csv"));
                write_cells_csv(&report.cells, BufWriter::new(File::create(&p)?))?;
                written.push(p);
                let p = dir.join(format!("{stem}_groups.csv"));
                write_groups_csv(&report.groups, BufWriter::new(File::create(&p)?))?;
                written.push(p);
            }
            Format::Json => {
                let p = dir.join(format!("{stem}.json"));
                let mut w = BufWriter::new(File::create(&p)?);
                write_report_json(report, &mut w)?;
                w.flush()?;
                written.push(p);
            }
        }
    }
    Ok(written)
}
