//! Versioned JSON reports and the CSV plot data next to them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, Tolerances};
use crate::error::CliError;

pub const SCHEMA: &str = "mapcalc-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
    pub h: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub passed: bool,
    pub h: f64,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub data: Value,
    pub config: ExperimentConfig,
}

/// Report under construction plus its CSV table.
#[derive(Debug, Clone)]
pub struct Builder {
    command: String,
    h: f64,
    seed: u64,
    checks: Vec<Check>,
    data: serde_json::Map<String, Value>,
    csv_header: Vec<String>,
    csv_rows: Vec<Vec<String>>,
}

impl Builder {
    pub fn new(command: &str, h: f64, seed: u64) -> Self {
        Self {
            command: command.into(),
            h,
            seed,
            checks: Vec::new(),
            data: Default::default(),
            csv_header: Vec::new(),
            csv_rows: Vec::new(),
        }
    }

    pub fn set_h(&mut self, h: f64) {
        self.h = h;
    }

    /// `value ≤ tolerance`; NaN fails.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64, h: f64) {
        self.push(name.into(), value, Relation::AtMost, tolerance, h, value <= tolerance);
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, tolerance: f64, h: f64) {
        self.push(name.into(), value, Relation::AtLeast, tolerance, h, value >= tolerance);
    }

    /// A boolean property, recorded as `1 ≥ 1`.
    pub fn holds(&mut self, name: impl Into<String>, ok: bool, h: f64) {
        self.push(name.into(), if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0, h, ok);
    }

    fn push(&mut self, name: String, value: f64, relation: Relation, tolerance: f64, h: f64, passed: bool) {
        self.checks.push(Check { name, value, relation, tolerance, passed, h, seed: self.seed });
    }

    pub fn data(&mut self, key: &str, value: impl Serialize) {
        self.data.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn columns(&mut self, names: &[&str]) {
        self.csv_header = names.iter().map(|s| s.to_string()).collect();
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.csv_rows.push(cells);
    }

    pub fn finish(self, cfg: &ExperimentConfig) -> (Report, String) {
        let mut csv = self.csv_header.join(",");
        csv.push('\n');
        for r in &self.csv_rows {
            csv.push_str(&r.join(","));
            csv.push('\n');
        }
        let report = Report {
            schema: SCHEMA,
            passed: self.checks.iter().all(|c| c.passed),
            command: self.command,
            h: self.h,
            seed: self.seed,
            tolerances: cfg.tolerances.clone(),
            checks: self.checks,
            data: Value::Object(self.data),
            config: cfg.clone(),
        };
        (report, csv)
    }
}

/// Formats a float for CSV with round-trip precision.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Writes `<dir>/<stem>.json` and, if requested, `<dir>/<stem>.csv`.
pub fn write(dir: &Path, stem: &str, report: &Report, csv: &str, with_csv: bool) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let json_path = dir.join(format!("{stem}.json"));
    let mut json = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    fs::write(&json_path, json)?;
    let mut out = vec![json_path];
    if with_csv {
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, csv)?;
        out.push(csv_path);
    }
    Ok(out)
}
