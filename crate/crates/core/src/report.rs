//! JSON verification reports: one record per check with the quantities
//! compared, plus an environment block. Identical runs produce identical
//! JSON apart from the timings block.

use serde::{Deserialize, Serialize};

/// One verified inequality or identity: `lhs <= rhs + slack` (or an exact
/// match when slack is zero). `anchor` names the mathematical statement the
/// check instantiates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Records `lhs <= rhs + slack`.
    pub fn bound(name: &str, anchor: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        CheckRecord {
            name: name.to_string(),
            anchor: anchor.to_string(),
            lhs,
            rhs,
            slack,
            pass: lhs <= rhs + slack,
        }
    }

    /// Records an externally determined verdict with its quantities.
    pub fn verdict(name: &str, anchor: &str, lhs: f64, rhs: f64, pass: bool) -> Self {
        CheckRecord { name: name.to_string(), anchor: anchor.to_string(), lhs, rhs, slack: 0.0, pass }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Environment {
    pub grid_res: usize,
    pub tol: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Timings {
    pub total_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
    pub environment: Environment,
    pub timings: Timings,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckRecord>, environment: Environment, timings: Timings) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerificationReport { checks, environment, timings, pass }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
