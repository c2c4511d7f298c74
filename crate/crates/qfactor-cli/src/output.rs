//! Report document and its text, JSON and CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// serialized as null when absent or not finite
    pub residual: Option<f64>,
    pub details: Value,
    /// one-line text rendering of the details
    #[serde(skip)]
    pub summary: String,
}

impl Check {
    pub fn new(name: impl Into<String>, status: Status, residual: Option<f64>, details: Value) -> Self {
        Check { name: name.into(), status, residual, details, summary: String::new() }
    }

    /// Pass when `residual <= tol`; a NaN residual fails.
    pub fn threshold(name: impl Into<String>, residual: f64, tol: f64, details: Value) -> Self {
        let status = if residual <= tol { Status::Pass } else { Status::Fail };
        Check::new(name, status, Some(residual), details)
    }

    pub fn skip(name: impl Into<String>, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        Check::new(name, Status::Skip, None, serde_json::json!({ "reason": reason })).with_summary(reason)
    }

    pub fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        let msg = err.to_string();
        Check::new(name, Status::Fail, None, serde_json::json!({ "error": msg })).with_summary(msg)
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Self {
        self.summary = summary.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub family: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub q: Option<f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }
}

/// Plot-ready rows for CSV output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }
}

/// 17 significant digits.
pub fn full_precision(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

pub fn render_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn render_csv(table: &Table) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(&table.header).expect("in-memory write");
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Int(i) => i.to_string(),
                Cell::Num(v) => full_precision(*v),
                Cell::Text(t) => t.clone(),
            })
            .collect();
        w.write_record(&cells).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Checks as rows: name, status, residual.
pub fn checks_table(report: &Report) -> Table {
    let mut t = Table::new(&["name", "status", "residual"]);
    for c in &report.checks {
        let status = serde_json::to_value(c.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        t.push(vec![Cell::Text(c.name.clone()), Cell::Text(status), Cell::Num(c.residual.unwrap_or(f64::NAN))]);
    }
    t
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let params: Vec<String> = report.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = write!(out, "qfactor {}", report.tool_version);
    if let Some(f) = &report.family {
        let _ = write!(out, "  family {f}");
    }
    if let Some(q) = report.q {
        let _ = write!(out, "  q = {q}");
    }
    if !params.is_empty() {
        let _ = write!(out, "  ({})", params.join(", "));
    }
    out.push('\n');
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let (mut pass, mut fail, mut skip) = (0, 0, 0);
    for c in &report.checks {
        let tag = match c.status {
            Status::Pass => {
                pass += 1;
                "PASS"
            }
            Status::Fail => {
                fail += 1;
                "FAIL"
            }
            Status::Skip => {
                skip += 1;
                "SKIP"
            }
        };
        let res = c.residual.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{tag}  {:width$}  {res:>10}  {}", c.name, c.summary);
    }
    if !report.notes.is_empty() {
        out.push_str("notes:\n");
        for n in &report.notes {
            let _ = writeln!(out, "  - {n}");
        }
    }
    let _ = writeln!(out, "{pass} passed, {fail} failed, {skip} skipped");
    out
}
