use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::OutputFormat;

/// One pass/fail line of a run.
#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    /// Pass threshold; `value <= tol` unless `lower_bound` is set.
    pub tol: f64,
    pub lower_bound: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), pass: value <= tol, value, tol, lower_bound: false }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), pass: value >= tol, value, tol, lower_bound: true }
    }
}

/// Structured result of a command. Everything in it is a deterministic
/// function of the configuration and seed; wall time goes to a separate file.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: Value,
    pub checks: Vec<Check>,
    pub results: Value,
    pub outputs: Vec<String>,
    pub error: Option<String>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            checks: Vec::new(),
            results: Value::Null,
            outputs: Vec::new(),
            error: None,
            pass: true,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn finish(&mut self) {
        self.pass = self.error.is_none() && self.checks.iter().all(|c| c.pass);
    }
}

/// Rows of numbers or labels with a header.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn cell(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => match n.as_f64() {
                // Shortest representation that round-trips.
                Some(x) if n.is_f64() => format!("{x:?}"),
                _ => n.to_string(),
            },
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }

    pub fn write(&self, dir: &Path, stem: &str, format: OutputFormat) -> Result<PathBuf> {
        match format {
            OutputFormat::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Self::cell))?;
                }
                w.flush()?;
                Ok(path)
            }
            OutputFormat::Json => {
                let path = dir.join(format!("{stem}.json"));
                let records: Vec<serde_json::Map<String, Value>> = self
                    .rows
                    .iter()
                    .map(|r| self.columns.iter().cloned().zip(r.iter().cloned()).collect())
                    .collect();
                fs::write(&path, serde_json::to_string_pretty(&records)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
                Ok(path)
            }
        }
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn write_report(dir: &Path, stem: &str, report: &RunReport) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}_report.json"));
    fs::write(&path, serde_json::to_string_pretty(report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
