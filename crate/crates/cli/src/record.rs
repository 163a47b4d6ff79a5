//! Tabular run output: a JSON comment header followed by a CSV table.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Everything a command produced: the resolved inputs (header) and a metric
/// table. Columns listed in `timing_columns` hold wall-clock values and are
/// the only part allowed to differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub header: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub timing_columns: Vec<String>,
}

impl RunRecord {
    pub fn new(command: &str, header: Value, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            timing_columns: Vec::new(),
        }
    }

    pub fn with_timing(mut self, columns: &[&str]) -> Self {
        self.timing_columns = columns.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, parsed as floats; unparsable cells are skipped.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[i].parse().ok()).collect()
    }

    fn render(&self, keep: impl Fn(usize) -> bool) -> Result<String> {
        let mut out = Vec::new();
        writeln!(out, "# airgnn {}", self.command)?;
        writeln!(out, "# {}", serde_json::to_string(&self.header)?)?;
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            let pick = |row: &[String]| -> Vec<String> {
                row.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| v.clone()).collect()
            };
            w.write_record(pick(&self.columns))?;
            for row in &self.rows {
                w.write_record(pick(row))?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        self.render(|_| true)
    }

    /// The CSV with every timing column removed.
    pub fn to_csv_without_timing(&self) -> Result<String> {
        let timing: Vec<usize> = self.timing_columns.iter().filter_map(|c| self.column(c)).collect();
        self.render(|i| !timing.contains(&i))
    }

    /// Writes to `path`, or stdout when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        let text = self.to_csv()?;
        match path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                fs::write(p, text).with_context(|| format!("writing {}", p.display()))
            }
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fmt_ms(v: f64) -> String {
    format!("{v:.3}")
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
