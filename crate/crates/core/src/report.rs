//! Flat check records shared by every report.

use serde::{Deserialize, Serialize};

/// One verified inequality or identity: `max_violation ≤ 0` means it held
/// (for tolerance-style checks the value is the excess over the tolerance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub t: Option<f64>,
    pub max_violation: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(check: impl Into<String>, t: Option<f64>, max_violation: f64, pass: bool) -> Self {
        CheckRecord {
            check: check.into(),
            t,
            max_violation,
            pass,
        }
    }
}

/// Whether every record passed.
pub fn all_pass(records: &[CheckRecord]) -> bool {
    records.iter().all(|r| r.pass)
}
