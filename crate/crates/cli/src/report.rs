use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{CheckKind, ScenarioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

/// One compared quantity. `n` is `None` for the limit and for rows that
/// summarize the whole family (trends).
#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub n: Option<usize>,
    pub label: String,
    pub k: usize,
    pub times: Vec<f64>,
    pub value: f64,
    pub gap: Option<f64>,
    pub budget: Option<f64>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRow {
    pub fn new(n: Option<usize>, label: impl Into<String>, value: f64) -> Self {
        CheckRow {
            n,
            label: label.into(),
            k: 0,
            times: Vec::new(),
            value,
            gap: None,
            budget: None,
            status: Status::Skipped,
            note: None,
        }
    }

    pub fn times(mut self, times: &[f64]) -> Self {
        self.k = times.len();
        self.times = times.to_vec();
        self
    }

    /// Passes when `gap ≤ budget`.
    pub fn bounded(mut self, gap: f64, budget: f64) -> Self {
        self.gap = Some(gap);
        self.budget = Some(budget);
        self.status = Status::from_bool(gap <= budget);
        self
    }

    pub fn gap(mut self, gap: f64) -> Self {
        self.gap = Some(gap);
        self
    }

    pub fn status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub status: Status,
    /// Seed of the ensembles behind this check (absent for deterministic
    /// checks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub rows: Vec<CheckRow>,
}

impl CheckResult {
    /// Fails if any row fails; skipped only if every row is.
    pub fn new(check: CheckKind, seed: Option<u64>, rows: Vec<CheckRow>) -> Self {
        let status = if rows.iter().any(|r| r.status == Status::Fail) {
            Status::Fail
        } else if rows.iter().all(|r| r.status == Status::Skipped) {
            Status::Skipped
        } else {
            Status::Pass
        };
        CheckResult {
            check,
            status,
            seed,
            rows,
        }
    }

    /// CSV with columns `scenario,n,label,k,times,value,gap,budget,pass`;
    /// times are `;`-separated and floats use the shortest exact form.
    pub fn to_csv(&self, scenario: &str) -> String {
        let mut out = String::from("scenario,n,label,k,times,value,gap,budget,pass\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let times: Vec<String> = r.times.iter().map(f64::to_string).collect();
            let n = r.n.map(|n| n.to_string()).unwrap_or_else(|| "limit".into());
            writeln!(
                out,
                "{scenario},{n},{},{},{},{},{},{},{}",
                csv_field(&r.label),
                r.k,
                times.join(";"),
                r.value,
                opt(r.gap),
                opt(r.budget),
                r.status.as_str()
            )
            .expect("writing to a String");
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// What produced a report.
#[derive(Clone, Debug, Serialize)]
pub struct Fingerprint {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub n_grid: Vec<usize>,
    pub paths: usize,
    pub dt: f64,
    pub resolution: usize,
    pub fiber_resolution: usize,
    pub pathlaw_bins: usize,
    pub os: &'static str,
    pub arch: &'static str,
}

impl Fingerprint {
    pub fn of(config: &ScenarioConfig) -> Self {
        Fingerprint {
            tool: "lab",
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            n_grid: config.n_grid(),
            paths: config.paths,
            dt: config.dt,
            resolution: config.grid.resolution,
            fiber_resolution: config.grid.fiber_resolution,
            pathlaw_bins: config.pathlaw.bins,
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// False when some paths diverged or a check could not be evaluated;
    /// see `problems`.
    pub complete: bool,
    pub problems: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub fingerprint: Fingerprint,
}

impl ScenarioReport {
    /// Every non-skipped check passed and the report is complete.
    pub fn passed(&self) -> bool {
        self.complete && self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, kind: CheckKind) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == kind)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let failed = c.rows.iter().filter(|r| r.status == Status::Fail).count();
            writeln!(
                out,
                "{:<12} {:<8} {} rows, {failed} failing",
                c.check.as_str(),
                c.status.as_str(),
                c.rows.len()
            )
            .expect("writing to a String");
        }
        for p in &self.problems {
            writeln!(out, "incomplete: {p}").expect("writing to a String");
        }
        out
    }

    /// Writes `report.json`, one CSV per check and `manifest.json` into
    /// `dir`, returning the files written.
    pub fn write(&self, config: &ScenarioConfig, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for c in &self.checks {
            let path = dir.join(format!("{}.csv", c.check.as_str()));
            fs::write(&path, c.to_csv(&self.scenario))?;
            files.push(path);
        }
        let report = dir.join("report.json");
        fs::write(&report, to_json(self))?;
        files.push(report);
        let manifest = Manifest {
            tool: "lab",
            version: env!("CARGO_PKG_VERSION"),
            core_version: mmlab::VERSION,
            scenario: self.scenario.clone(),
            seed: config.seed,
            check_seeds: self
                .checks
                .iter()
                .filter_map(|c| c.seed.map(|s| (c.check.as_str(), s)))
                .collect(),
            files: files
                .iter()
                .map(|p| {
                    p.file_name()
                        .unwrap_or_default()
                        .to_string_lossy()
                        .into_owned()
                })
                .collect(),
            config: config.clone(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, to_json(&manifest))?;
        files.push(path);
        Ok(files)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    scenario: String,
    seed: u64,
    check_seeds: Vec<(&'a str, u64)>,
    files: Vec<String>,
    config: ScenarioConfig,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
