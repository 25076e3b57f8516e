//! Run reports: numeric checks, failure markers, CSV tables and the JSON
//! summary. Nothing here records wall-clock time, so identical inputs give
//! byte-identical files.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    CheckFailed = 1,
    InvalidConfig = 2,
    ComputationFailed = 3,
    Io = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// One residual compared against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= tolerance`. A non-finite value fails and is
    /// reported as `f64::MAX` so the JSON stays numeric.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        let passed = value.is_finite() && value <= tolerance;
        let value = if value.is_finite() { value } else { f64::MAX };
        Check { name: name.into(), value, tolerance, passed }
    }

    /// Passes when `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Check {
        let passed = value.is_finite() && value >= bound;
        let value = if value.is_finite() { value } else { f64::MAX };
        Check { name: name.into(), value, tolerance: bound, passed }
    }
}

/// A computation that did not produce a value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub context: String,
    pub code: String,
    pub message: String,
}

impl Failure {
    pub fn from_error(context: impl Into<String>, e: &geomflux::Error) -> Failure {
        Failure { context: context.into(), code: e.code().to_string(), message: e.to_string() }
    }
}

/// CSV table with a fixed header. Floats use the shortest digits that parse
/// back to the same binary64, switching to exponent form outside 1e-5..1e16.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

/// A CSV cell.
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Cell {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Cell {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Cell {
        Cell::Text(b.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Cell {
        x.map_or(Cell::Empty, Into::into)
    }
}

impl Table {
    pub fn new(header: &[&'static str]) -> Table {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn header(&self) -> &[&'static str] {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.header.len(), "row width must match the header");
        let row = cells
            .into_iter()
            .map(|c| match c {
                Cell::Num(x) if x.is_finite() => format!("{x:?}"),
                Cell::Num(_) => String::new(),
                Cell::Int(k) => k.to_string(),
                Cell::Text(s) => s,
                Cell::Empty => String::new(),
            })
            .collect();
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything a task produced.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub table: Table,
    pub results: Value,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
}

impl TaskOutput {
    pub fn new(table: Table) -> TaskOutput {
        TaskOutput { table, results: Value::Null, checks: Vec::new(), failures: Vec::new() }
    }

    pub fn status(&self) -> ExitStatus {
        if !self.failures.is_empty() {
            ExitStatus::ComputationFailed
        } else if self.checks.iter().any(|c| !c.passed) {
            ExitStatus::CheckFailed
        } else {
            ExitStatus::Pass
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub task: String,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub status: &'static str,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub results: Value,
}

impl RunReport {
    pub fn new(config: &RunConfig, output: &TaskOutput) -> RunReport {
        let status = match output.status() {
            ExitStatus::Pass => "pass",
            ExitStatus::CheckFailed => "check-failed",
            _ => "error",
        };
        RunReport {
            task: config.task.name().to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config_hash(config),
            seed: config.seed,
            status,
            checks: output.checks.clone(),
            failures: output.failures.clone(),
            results: output.results.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// SHA-256 of the canonical resolved config, hex encoded.
pub fn config_hash(config: &RunConfig) -> String {
    format!("{:x}", Sha256::digest(config.to_json().as_bytes()))
}
