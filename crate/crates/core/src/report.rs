use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// The bound is only guaranteed up to a validity horizon and the data
    /// ran past it.
    Inconclusive,
    /// The check does not apply to this input (e.g. pinch bounds for a
    /// uniform transform-test profile).
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
            Status::Skipped => "skipped",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub status: Status,
    pub residual: f64,
    pub tolerance: f64,
    /// Short name of the property being checked.
    pub anchor: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckResult {
    /// Pass/fail decided by `residual <= tolerance`.
    pub fn graded(id: &str, anchor: &str, residual: f64, tolerance: f64) -> Self {
        let status = if residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        CheckResult {
            id: id.to_string(),
            status,
            residual,
            tolerance,
            anchor: anchor.to_string(),
            detail: String::new(),
        }
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    /// Observed convergence orders; only filled from a study over three or
    /// more grids.
    #[serde(default)]
    pub refinement_orders: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.refinement_orders.extend(other.refinement_orders);
    }

    pub fn get(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// True when nothing failed outright; inconclusive and skipped checks
    /// do not count against the report.
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<13} {:<36} residual={:.3e} tol={:.3e} {}",
                c.status.to_string(),
                c.id,
                c.residual,
                c.tolerance,
                c.detail
            )?;
        }
        for (id, p) in &self.refinement_orders {
            writeln!(f, "order         {id:<36} p={p:.3}")?;
        }
        Ok(())
    }
}
