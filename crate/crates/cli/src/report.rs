//! Check records and their text/CSV rendering.
//!
//! Summary CSV columns: `command,check,anchor,verdict,metric,value`, one row
//! per metric of each record. Records without metrics get one row with empty
//! metric and value.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const SUMMARY_COLUMNS: [&str; 6] = ["command", "check", "anchor", "verdict", "metric", "value"];

/// Header line of every report that contains sampled or probed evidence.
pub const EVIDENCE_NOTE: &str =
    "sampled checks and probes are numerical evidence over finite budgets, not proofs; \
     the blending-region argument has no finite surrogate";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// A negative control that failed the way it should.
    ExpectedFail,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::ExpectedFail => "expected-fail",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Pass, Self::Fail, Self::ExpectedFail].into_iter().find(|v| v.as_str() == s)
    }

    pub fn is_ok(self) -> bool {
        self != Self::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    /// The property this record checks, stated mathematically.
    pub anchor: String,
    pub status: Status,
    pub metrics: Vec<(String, String)>,
}

impl Record {
    pub fn new(name: &str, anchor: &str, status: Status) -> Self {
        Self { name: name.into(), anchor: anchor.into(), status, metrics: Vec::new() }
    }

    pub fn metric(mut self, key: &str, value: impl ToString) -> Self {
        self.metrics.push((key.into(), value.to_string()));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub notes: Vec<String>,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self { command: command.into(), config_hash: config_hash.into(), notes: Vec::new(), records: Vec::new() }
    }

    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.status.is_ok()).count()
    }

    pub fn passed(&self) -> bool {
        self.failed() == 0
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "config_hash: {}", self.config_hash);
        let _ = writeln!(s, "records: {}", self.records.len());
        let _ = writeln!(s, "failed: {}", self.failed());
        for r in &self.records {
            let _ = writeln!(s, "\n[{}]", r.name);
            let _ = writeln!(s, "anchor: {}", r.anchor);
            let _ = writeln!(s, "verdict: {}", r.status.as_str());
            for (k, v) in &r.metrics {
                let _ = writeln!(s, "{k}: {v}");
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(SUMMARY_COLUMNS)?;
        for r in &self.records {
            let verdict = r.status.as_str();
            if r.metrics.is_empty() {
                w.write_record([self.command.as_str(), &r.name, &r.anchor, verdict, "", ""])?;
            }
            for (k, v) in &r.metrics {
                w.write_record([self.command.as_str(), &r.name, &r.anchor, verdict, k, v])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<command>.txt` and `<command>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join(format!("{}.txt", self.command)), self.to_text())?;
        self.write_csv(&dir.join(format!("{}.csv", self.command))).map_err(std::io::Error::other)
    }

    /// Reads back a summary CSV. Metrics and verdicts survive; notes do not.
    pub fn read_csv(path: &Path, config_hash: &str) -> csv::Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut report = Report::new("", config_hash);
        for row in r.records() {
            let row = row?;
            let get = |i: usize| row.get(i).unwrap_or("").to_string();
            report.command = get(0);
            let status = Status::parse(&get(3)).unwrap_or(Status::Fail);
            let name = get(1);
            if report.records.last().is_none_or(|last| last.name != name) {
                report.records.push(Record::new(&name, &get(2), status));
            }
            if !get(4).is_empty() {
                report.records.last_mut().expect("pushed above").metrics.push((get(4), get(5)));
            }
        }
        Ok(report)
    }
}

/// Plain CSV table with a fixed header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
    w.write_record(header).map_err(std::io::Error::other)?;
    for row in rows {
        w.write_record(row).map_err(std::io::Error::other)?;
    }
    w.flush()
}

/// Formats a point as space-separated coordinates.
pub fn fmt_point(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
