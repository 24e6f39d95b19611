//! Run reports: JSON for machines, a short text summary for people.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Direction of a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub metric: String,
    /// `None` when the run did not produce the metric; such a check fails.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Metrics at one checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
}

impl Checkpoint {
    pub fn new(t: f64, tau: Option<f64>) -> Self {
        Self {
            t,
            tau,
            metrics: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub id: String,
    pub kind: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Scalar results of the whole run.
    pub metrics: BTreeMap<String, f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub warnings: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn new(id: String, kind: String, seed: u64) -> Self {
        Self {
            id,
            kind,
            seed,
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            checkpoints: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Compares a metric against a threshold and records the outcome.
    pub fn gate(&mut self, metric: &str, tolerance: f64, bound: Bound, note: Option<String>) {
        let value = self.metric(metric);
        let passed = match value {
            Some(v) if v.is_finite() || bound == Bound::AtLeast => match bound {
                Bound::AtMost => v <= tolerance,
                Bound::AtLeast => v >= tolerance,
            },
            _ => false,
        };
        self.push_check(Check {
            metric: metric.to_string(),
            value,
            tolerance,
            bound,
            passed,
            note,
        });
    }

    pub fn push_check(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{} [{}] seed {}: {verdict} ({:.2} s)",
            self.id, self.kind, self.seed, self.wall_clock_s
        );
        for c in &self.checks {
            let op = match c.bound {
                Bound::AtMost => "<=",
                Bound::AtLeast => ">=",
            };
            let v = c
                .value
                .map_or_else(|| "missing".to_string(), |v| format!("{v:.3e}"));
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = write!(s, "  {mark} {:<20} {v} {op} {:.3e}", c.metric, c.tolerance);
            if let Some(n) = &c.note {
                let _ = write!(s, " ({n})");
            }
            s.push('\n');
        }
        for (k, v) in &self.metrics {
            if !self.checks.iter().any(|c| &c.metric == k) {
                let _ = writeln!(s, "  {k:<25} {v:.6e}");
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
        s
    }

    /// Writes `report.json` and `summary.txt` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        for name in ["report.json", "summary.txt"] {
            if !self.outputs.iter().any(|o| o == name) {
                self.outputs.push(name.to_string());
            }
        }
        let json =
            serde_json::to_string_pretty(self).map_err(|e| crate::Error::Format(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json)?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}
