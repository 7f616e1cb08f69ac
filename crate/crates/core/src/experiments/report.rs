//! Experiment reports: JSON summary plus one CSV per table.

use crate::error::Result;
use crate::fit::LineFit;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtLeast,
    AtMost,
    /// `value` is a boolean encoded as 0 or 1; `tolerance` is unused.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Verdict {
    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Verdict { name: name.into(), value, tolerance, comparison: Comparison::AtLeast, passed: value >= tolerance }
    }

    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Verdict { name: name.into(), value, tolerance, comparison: Comparison::AtMost, passed: value <= tolerance }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Verdict {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            comparison: Comparison::Holds,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_cell(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

fn format_cell(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub study: String,
    pub config_hash: String,
    pub seed: u64,
    pub summary: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub fit: Option<LineFit>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(study: &str, config_hash: String, seed: u64) -> Self {
        ExperimentReport {
            study: study.into(),
            config_hash,
            seed,
            summary: BTreeMap::new(),
            tables: Vec::new(),
            fit: None,
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `report.json` and `<table>.csv` into `dir`, returning the paths written.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    std::fs::write(&json, report.to_json()?)?;
    written.push(json);
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, t.to_csv())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("errors", &["eps", "error", "se"]);
        assert_eq!(t.to_csv(), "eps,error,se\n");
    }

    #[test]
    fn cells_are_plain_or_exponent() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![3.0, 0.125]);
        assert_eq!(t.to_csv(), "a,b\n3,1.25e-1\n");
    }

    #[test]
    fn json_round_trip() {
        let mut r = ExperimentReport::new("cell", "abc".into(), 7);
        r.summary.insert("mu".into(), 0.1 + 0.2);
        r.verdicts.push(Verdict::at_most("gap", 0.05, 0.1));
        let mut t = Table::new("t", &["a"]);
        t.push(vec![1.0 / 3.0]);
        r.tables.push(t);
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
