//! Machine-readable verification report.

use serde::{Deserialize, Serialize};

use crate::pipeline::{Context, Health};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// Comparison applied by a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `value ≤ threshold`.
    AtMost,
    /// `value < 0`.
    Negative,
    /// Reported only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Non-finite values are written as `null`.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub rule: Rule,
    pub pass: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Check {
    pub fn new(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value: finite(value),
            threshold: Some(threshold),
            rule: Rule::AtMost,
            pass: value <= threshold,
        }
    }

    pub fn negative(name: &str, value: f64) -> Self {
        Check {
            name: name.into(),
            value: finite(value),
            threshold: Some(0.0),
            rule: Rule::Negative,
            pass: value < 0.0,
        }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Check {
            name: name.into(),
            value: finite(value),
            threshold: None,
            rule: Rule::Info,
            pass: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub status: Status,
    /// Points or vertices that entered the residuals.
    pub samples: usize,
    /// Points excluded as invalid or degenerate.
    pub masked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub checks: Vec<Check>,
}

impl Suite {
    pub fn new(name: &str, samples: usize, masked: usize, checks: Vec<Check>) -> Self {
        let status = if checks.iter().all(|c| c.pass) {
            Status::Pass
        } else {
            Status::Fail
        };
        Suite {
            name: name.into(),
            status,
            samples,
            masked,
            note: None,
            checks,
        }
    }

    pub fn skipped(name: &str, note: &str) -> Self {
        Suite {
            name: name.into(),
            status: Status::Skipped,
            samples: 0,
            masked: 0,
            note: Some(note.into()),
            checks: Vec::new(),
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub field: String,
    pub chart: String,
    pub t1: f64,
    pub t2: f64,
    pub grid: [usize; 2],
    pub invalid_points: usize,
    pub passed: bool,
    pub suites: Vec<Suite>,
}

impl VerifyReport {
    pub fn new(ctx: &Context, health: Health, suites: Vec<Suite>) -> Self {
        let passed = suites.iter().all(|s| s.status != Status::Fail);
        VerifyReport {
            field: ctx.velocity().name().into(),
            chart: ctx.chart().name().into(),
            t1: ctx.config.time.t1,
            t2: ctx.config.time.t2(),
            grid: [ctx.grid.nx(), ctx.grid.ny()],
            invalid_points: health.invalid,
            passed,
            suites,
        }
    }

    pub fn suite(&self, name: &str) -> Option<&Suite> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }
}
