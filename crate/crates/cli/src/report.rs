//! Report and table emission.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Command, ExperimentConfig};
use crate::error::CliError;

/// One verified property. Hard checks decide the exit code; soft ones are diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub hard: bool,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    /// Passes when `value < bound`.
    pub fn below(name: impl Into<String>, hard: bool, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            hard,
            passed: value < bound,
            value,
            bound,
        }
    }

    /// Passes when `value > bound`.
    pub fn above(name: impl Into<String>, hard: bool, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            hard,
            passed: value > bound,
            value,
            bound,
        }
    }

    /// A yes/no property; `value` is 1 when it holds.
    pub fn holds(name: impl Into<String>, hard: bool, ok: bool) -> Self {
        Check {
            name: name.into(),
            hard,
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: Command,
    /// The configuration after defaults, overrides and validation.
    pub config: ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: Value,
}

impl Report {
    pub fn new(command: Command, config: ExperimentConfig, checks: Vec<Check>, results: Value) -> Self {
        let passed = checks.iter().all(|c| c.passed || !c.hard);
        Report {
            command,
            config,
            passed,
            checks,
            results,
        }
    }

    /// Pretty JSON with object keys in sorted order.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
        text.push('\n');
        text
    }
}

/// A CSV table: named columns, one row per record.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| num(*x)).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Everything a command produces.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: Report,
    pub table: Table,
    /// Extra files (name, contents), e.g. snapshots or a serialized `Omega`.
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: &Path| {
            let p = path.display().to_string();
            move |source| CliError::Io { path: p, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut all = vec![
            ("report.json".to_string(), self.report.to_json()),
            ("tables.csv".to_string(), self.table.to_csv()),
        ];
        all.extend(self.files.iter().cloned());
        for (name, contents) in all {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(io(&path))?;
        }
        Ok(())
    }
}
