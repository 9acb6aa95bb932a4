//! Report files: `report.json`, `checks.csv`, `tables/*.csv` and `summary.txt`.
//!
//! The JSON report has two members. `header` holds the generation timestamp
//! and tool version; `body` is a deterministic function of the config and
//! seeds, so two runs produce byte-identical bodies.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use sepfluct::analysis::Check;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl SuiteResult {
    pub fn new(suite: &str) -> Self {
        SuiteResult {
            suite: suite.to_string(),
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub generated_unix: u64,
    pub tool: String,
}

impl Header {
    pub fn now() -> Self {
        Header {
            generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            tool: format!("sepfluct {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Body {
    pub config: ExperimentConfig,
    pub pass: bool,
    pub suites: Vec<SuiteResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub header: Header,
    pub body: Body,
}

impl Report {
    pub fn new(config: ExperimentConfig, suites: Vec<SuiteResult>) -> Self {
        Report {
            header: Header::now(),
            body: Body {
                pass: suites.iter().all(SuiteResult::pass),
                config,
                suites,
            },
        }
    }

    /// Writes every report artifact under `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir.join("tables"))?;
        let json = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join("report.json"), json + "\n")?;

        let mut w = csv::Writer::from_path(dir.join("checks.csv"))?;
        w.write_record(["suite", "name", "claim", "estimate", "oracle", "tolerance", "pass", "detail"])?;
        for s in &self.body.suites {
            for c in &s.checks {
                w.write_record([
                    s.suite.as_str(),
                    &c.name,
                    &c.claim,
                    &fmt_num(c.estimate),
                    &fmt_num(c.oracle),
                    &fmt_num(c.tolerance),
                    if c.pass { "true" } else { "false" },
                    &c.detail,
                ])?;
            }
            for t in &s.tables {
                let mut tw = csv::Writer::from_path(dir.join("tables").join(format!("{}-{}.csv", s.suite, t.name)))?;
                tw.write_record(&t.columns)?;
                for row in &t.rows {
                    tw.write_record(row.iter().map(cell))?;
                }
                tw.flush()?;
            }
        }
        w.flush()?;

        let body = serde_json::to_value(&self.body).map_err(io::Error::other)?;
        fs::write(dir.join("summary.txt"), summary(&body))?;
        Ok(())
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), fmt_num),
        other => other.to_string(),
    }
}

fn num(v: &Value) -> String {
    v.as_f64().map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"))
}

/// Plain-text summary of a report body (as JSON, so it also serves `report <dir>`).
pub fn summary(body: &Value) -> String {
    let mut out = String::new();
    let name = body["config"]["name"].as_str().unwrap_or("experiment");
    let _ = writeln!(out, "experiment {name}");
    let empty = Vec::new();
    let mut total = 0;
    let mut failed = 0;
    for s in body["suites"].as_array().unwrap_or(&empty) {
        let checks = s["checks"].as_array().unwrap_or(&empty);
        let bad = checks.iter().filter(|c| c["pass"] != Value::Bool(true)).count();
        total += checks.len();
        failed += bad;
        let _ = writeln!(
            out,
            "\n[{}] {} {}/{} checks passed",
            if bad == 0 { "PASS" } else { "FAIL" },
            s["suite"].as_str().unwrap_or("?"),
            checks.len() - bad,
            checks.len()
        );
        let _ = writeln!(out, "  {:<4} {:<52} {:>12} {:>12} {:>12}", "", "check", "estimate", "oracle", "tolerance");
        for c in checks {
            let _ = writeln!(
                out,
                "  {:<4} {:<52} {:>12} {:>12} {:>12}",
                if c["pass"] == Value::Bool(true) { "ok" } else { "FAIL" },
                c["name"].as_str().unwrap_or("?"),
                num(&c["estimate"]),
                num(&c["oracle"]),
                num(&c["tolerance"]),
            );
        }
    }
    let _ = writeln!(out, "\n{} of {total} checks passed", total - failed);
    out
}

/// Reads `report.json` from a directory; returns the summary text and the
/// overall verdict.
pub fn read_summary(dir: &Path) -> io::Result<(String, bool)> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let body = &v["body"];
    if !body.is_object() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "report.json has no body"));
    }
    Ok((summary(body), body["pass"] == Value::Bool(true)))
}
