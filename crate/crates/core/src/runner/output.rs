//! CSV and plot-script emission.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-run metric tables sharing one index column (epoch, window, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub index_name: String,
    pub index: Vec<u64>,
    pub metrics: Vec<String>,
    /// `runs[run][row][metric]`.
    pub runs: Vec<Vec<Vec<f64>>>,
}

impl CurveSet {
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::config("no run records to emit"));
        }
        for (r, rows) in self.runs.iter().enumerate() {
            if rows.len() != self.index.len() {
                return Err(Error::config(format!(
                    "run {r} has {} rows, expected {}",
                    rows.len(),
                    self.index.len()
                )));
            }
            if let Some(row) = rows.iter().find(|row| row.len() != self.metrics.len()) {
                return Err(Error::config(format!(
                    "run {r} has a row with {} metrics, expected {}",
                    row.len(),
                    self.metrics.len()
                )));
            }
        }
        Ok(())
    }

    /// Mean and population standard deviation over runs for each row and
    /// metric.
    pub fn summary(&self) -> Vec<Vec<(f64, f64)>> {
        let n = self.runs.len() as f64;
        (0..self.index.len())
            .map(|row| {
                (0..self.metrics.len())
                    .map(|m| {
                        let values = self.runs.iter().map(|run| run[row][m]);
                        let mean = values.clone().sum::<f64>() / n;
                        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        (mean, var.sqrt())
                    })
                    .collect()
            })
            .collect()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// A buffered CSV writer that reports i/o errors against its path.
pub struct CsvWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = CsvWriter {
            path: path.to_path_buf(),
            out: create(path)?,
        };
        w.row(header.iter().map(|s| s.to_string()))?;
        Ok(w)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let line = fields.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Writes `curves.csv` (mean and std per metric), `runs.csv` (every run)
/// and `plot_curves.py`, which reads only `curves.csv`.
pub fn emit_curves(curves: &CurveSet, dir: &Path) -> Result<()> {
    curves.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut header = vec![curves.index_name.clone()];
    for m in &curves.metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&dir.join("curves.csv"), &header_refs)?;
    for (row, stats) in curves.summary().iter().enumerate() {
        let mut fields = vec![curves.index[row].to_string()];
        for &(mean, std) in stats {
            fields.push(fmt_f64(mean));
            fields.push(fmt_f64(std));
        }
        w.row(fields)?;
    }
    w.finish()?;

    let mut header = vec!["run".to_string(), curves.index_name.clone()];
    header.extend(curves.metrics.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&dir.join("runs.csv"), &header_refs)?;
    for (r, rows) in curves.runs.iter().enumerate() {
        for (row, values) in rows.iter().enumerate() {
            let mut fields = vec![r.to_string(), curves.index[row].to_string()];
            fields.extend(values.iter().map(|&v| fmt_f64(v)));
            w.row(fields)?;
        }
    }
    w.finish()?;

    let script = plot_script(&curves.index_name, &curves.metrics);
    let path = dir.join("plot_curves.py");
    std::fs::write(&path, script).map_err(|e| Error::io(&path, e))
}

fn plot_script(index: &str, metrics: &[String]) -> String {
    let names = metrics
        .iter()
        .map(|m| format!("{m:?}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        r#"#!/usr/bin/env python3
"""Plots curves.csv from this directory: mean with a ±1 std band."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "curves.csv")) as f:
    rows = list(csv.DictReader(f))
x = [float(r["{index}"]) for r in rows]
fig, ax = plt.subplots()
for name in [{names}]:
    mean = [float(r[name + "_mean"]) for r in rows]
    std = [float(r[name + "_std"]) for r in rows]
    ax.plot(x, mean, label=name)
    ax.fill_between(x, [m - s for m, s in zip(mean, std)],
                    [m + s for m, s in zip(mean, std)], alpha=0.2)
ax.set_xlabel("{index}")
ax.legend()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "curves.png")
fig.savefig(out, dpi=120)
"#
    )
}
