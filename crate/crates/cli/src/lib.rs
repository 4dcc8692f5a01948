//! Scenario runner for the `lab` binary: JSON configs, scenario execution
//! and the CSV/JSON artifacts of a run.

// `!(x > 0.0)` is how NaN gets rejected, and index loops read closer to the
// formulas in the numerical kernels.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{CheckKind, ConfigIssue, ScenarioConfig, ScenarioKind};
pub use report::{CheckResult, CheckRow, ScenarioReport, Status};
pub use scenario::{build_family, run_scenario, RunError};

/// Overrides the output directory of every run.
pub const OUT_DIR_ENV: &str = "LAB_OUT_DIR";
