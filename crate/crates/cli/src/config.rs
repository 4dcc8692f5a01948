//! Scenario configuration files.
//!
//! A scenario is one JSON object. Only `scenario` and `seed` are required;
//! everything else has a default that depends on the scenario kind.

use std::fmt;
use std::path::{Path, PathBuf};

use mmlab::convergence::GridSettings;
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_GRID: [usize; 5] = [1, 2, 4, 8, 16];
pub const DEFAULT_PATHS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TorusCollapse,
    ConeInterval,
    OuFamily,
    ReflectedFamily,
    CustomFinite,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::TorusCollapse,
        ScenarioKind::ConeInterval,
        ScenarioKind::OuFamily,
        ScenarioKind::ReflectedFamily,
        ScenarioKind::CustomFinite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::TorusCollapse => "torus_collapse",
            ScenarioKind::ConeInterval => "cone_interval",
            ScenarioKind::OuFamily => "ou_family",
            ScenarioKind::ReflectedFamily => "reflected_family",
            ScenarioKind::CustomFinite => "custom_finite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::TorusCollapse => "S¹(2π) × S¹(2π/n) collapsing onto the circle S¹(2π)",
            ScenarioKind::ConeInterval => {
                "meshed paraboloid cones x = n(y² + z²) collapsing onto [0, 1]"
            }
            ScenarioKind::OuFamily => {
                "Ornstein–Uhlenbeck potentials (1 + 1/n)|x|²/2 tending to the standard one"
            }
            ScenarioKind::ReflectedFamily => {
                "reflected Brownian motion on [0, 1 − 1/n] tending to [0, 1]"
            }
            ScenarioKind::CustomFinite => {
                "user-supplied finite spaces with index maps onto a finite limit"
            }
        }
    }

    /// Checks run when the config does not list any.
    pub fn default_checks(self) -> Vec<CheckKind> {
        use CheckKind::*;
        match self {
            ScenarioKind::TorusCollapse => {
                vec![Pmg, Fdd, Pathlaw, Entropy, InitialLaw, Modulus, Kolmogorov]
            }
            ScenarioKind::ConeInterval => vec![Pmg, Fdd, Pathlaw, Entropy, InitialLaw],
            ScenarioKind::OuFamily => vec![Pmg, Fdd, InitialLaw, Marginal],
            ScenarioKind::ReflectedFamily => vec![Pmg, Fdd, InitialLaw, Marginal, Occupation],
            ScenarioKind::CustomFinite => vec![Pmg, Fdd, Pathlaw, Entropy, InitialLaw],
        }
    }

    /// Checks that make sense for this kind.
    pub fn supports(self, check: CheckKind) -> bool {
        match check {
            CheckKind::Marginal => {
                matches!(self, ScenarioKind::OuFamily | ScenarioKind::ReflectedFamily)
            }
            CheckKind::Occupation => self == ScenarioKind::ReflectedFamily,
            CheckKind::Entropy | CheckKind::Pathlaw => {
                !matches!(self, ScenarioKind::OuFamily | ScenarioKind::ReflectedFamily)
            }
            CheckKind::Modulus | CheckKind::Kolmogorov => self != ScenarioKind::CustomFinite,
            _ => true,
        }
    }

    pub fn default_n_grid(self) -> Vec<usize> {
        match self {
            ScenarioKind::ReflectedFamily => {
                DEFAULT_N_GRID.iter().copied().filter(|&n| n >= 2).collect()
            }
            _ => DEFAULT_N_GRID.to_vec(),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Pulled-back integrals of the test functions against `m̃`.
    Pmg,
    /// Nested semigroup operators at every time tuple.
    Fdd,
    /// `W₁` between simulated finite-dimensional path distributions.
    Pathlaw,
    /// Relative entropy of the time-`ε` transition from the base point.
    Entropy,
    /// `W₁` between the start laws `m̃` pushed onto the limit.
    InitialLaw,
    /// Modulus-of-continuity probabilities over the `η` grid.
    Modulus,
    /// Kolmogorov moment exponent on the limit.
    Kolmogorov,
    /// Euler–Maruyama marginal distances against the limit.
    Marginal,
    /// Long-time occupation of the limit against its equilibrium.
    Occupation,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Pmg => "pmg",
            CheckKind::Fdd => "fdd",
            CheckKind::Pathlaw => "pathlaw",
            CheckKind::Entropy => "entropy",
            CheckKind::InitialLaw => "initial_law",
            CheckKind::Modulus => "modulus",
            CheckKind::Kolmogorov => "kolmogorov",
            CheckKind::Marginal => "marginal",
            CheckKind::Occupation => "occupation",
        }
    }

    /// Tag mixed into the master seed for this check's ensembles.
    pub fn seed_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionShape {
    Constant {
        value: f64,
    },
    Cosine {
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Hat {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        height: f64,
    },
    DistanceCap {
        center: Vec<f64>,
        cap: f64,
    },
    Clamp {
        lo: f64,
        hi: f64,
    },
}

/// `scale · shape + shift`, plus `fiber_weight` times the fibre offset on the
/// pre-limit spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub function: FunctionShape,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub fiber_weight: f64,
}

impl TestFunctionSpec {
    pub fn new(function: FunctionShape) -> Self {
        TestFunctionSpec {
            function,
            scale: 1.0,
            shift: 0.0,
            fiber_weight: 0.0,
        }
    }

    pub fn scaled(mut self, scale: f64, shift: f64) -> Self {
        self.scale = scale;
        self.shift = shift;
        self
    }

    pub fn with_fiber_weight(mut self, w: f64) -> Self {
        self.fiber_weight = w;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// Every process starts at the base point.
    Point,
    /// Start from `m̃ = e^{−c d²(x̄, ·)} m / z`.
    Weighted { c: f64 },
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Weighted { c: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub resolution: usize,
    pub fiber_resolution: usize,
    /// Meshing resolution of the cone family.
    pub cone_resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = GridSettings::default();
        GridSpec {
            resolution: g.resolution,
            fiber_resolution: g.fiber_resolution,
            cone_resolution: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Quadrature allowance added to every deterministic budget.
    pub quadrature: f64,
    /// Standard errors allowed on Monte Carlo comparisons.
    pub sigmas: f64,
    /// Allowed excess of the entropy over the limit entropy.
    pub entropy_slack: f64,
    /// Significance level of the occupation test.
    pub ks_level: f64,
    /// Accepted range of the fitted decay exponent of marginal gaps.
    pub decay_exponent: [f64; 2],
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quadrature: 1e-6,
            sigmas: 3.0,
            entropy_slack: 1.5,
            ks_level: 0.01,
            decay_exponent: [0.75, 1.25],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLawSpec {
    pub bins: usize,
    pub bootstrap: usize,
}

impl Default for PathLawSpec {
    fn default() -> Self {
        PathLawSpec {
            bins: 48,
            bootstrap: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessSpec {
    /// Window widths, largest first.
    pub etas: Vec<f64>,
    pub delta: f64,
    pub horizon: f64,
    pub beta: f64,
    pub theta_range: [f64; 2],
    /// Start times of the Kolmogorov increments.
    pub kolmogorov_times: Vec<f64>,
    /// Time of the transition measured by the entropy check.
    pub entropy_time: f64,
}

impl Default for TightnessSpec {
    fn default() -> Self {
        TightnessSpec {
            etas: vec![0.4, 0.2, 0.1, 0.05],
            delta: 0.5,
            horizon: 0.25,
            beta: 4.0,
            theta_range: [1.7, 2.3],
            kolmogorov_times: vec![0.25, 0.5],
            entropy_time: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginalSpec {
    /// Time of the compared marginal.
    pub time: f64,
    /// Starting point of every simulated path.
    pub start: f64,
    /// Horizon of the occupation test.
    pub equilibration_time: f64,
}

impl Default for MarginalSpec {
    fn default() -> Self {
        MarginalSpec {
            time: 1.0,
            start: 0.0,
            equilibration_time: 2.0,
        }
    }
}

/// A finite metric measure space given by its distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSpec {
    pub distances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub base: usize,
    /// Edge conductances of the generator; the ε-neighbourhood graph of the
    /// distances when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conductances: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomMember {
    pub n: usize,
    pub space: FiniteSpec,
    /// Image of every atom in the limit.
    pub map: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFamily {
    pub limit: FiniteSpec,
    pub members: Vec<CustomMember>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// Master seed; every ensemble derives its own seed from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    /// Time tuples `t₁ < … < t_k` for the fdd and path-law checks.
    #[serde(default = "default_times")]
    pub times: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<Vec<TestFunctionSpec>>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub pathlaw: PathLawSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub tightness: TightnessSpec,
    #[serde(default)]
    pub marginal: MarginalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn default_times() -> Vec<Vec<f64>> {
    vec![vec![0.25, 0.75]]
}

fn default_paths() -> usize {
    DEFAULT_PATHS
}

fn default_dt() -> f64 {
    1e-3
}

/// One problem in a config file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigIssue {
    /// Dotted path of the offending field (`.` for the whole document).
    pub path: String,
    pub message: String,
    /// Line in the file, when the parser knows it.
    pub line: Option<usize>,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        path: path.into(),
        message: message.into(),
        line: None,
    }
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            seed,
            n_grid: None,
            times: default_times(),
            test_functions: None,
            paths: DEFAULT_PATHS,
            dt: default_dt(),
            start: StartSpec::default(),
            grid: GridSpec::default(),
            pathlaw: PathLawSpec::default(),
            tolerances: Tolerances::default(),
            tightness: TightnessSpec::default(),
            marginal: MarginalSpec::default(),
            checks: None,
            custom: None,
            output_dir: None,
        }
    }

    /// Parses JSON text; structural errors carry the field path and line.
    pub fn from_json(text: &str) -> Result<Self, Vec<ConfigIssue>> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            vec![ConfigIssue {
                path,
                message: inner.to_string(),
                line: Some(inner.line()),
            }]
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, Vec<ConfigIssue>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![issue(".", format!("cannot read {}: {e}", path.display()))])?;
        Self::from_json(&text)
    }

    pub fn n_grid(&self) -> Vec<usize> {
        match (&self.n_grid, &self.custom) {
            (Some(grid), _) => grid.clone(),
            (None, Some(custom)) if self.scenario == ScenarioKind::CustomFinite => {
                custom.members.iter().map(|m| m.n).collect()
            }
            _ => self.scenario.default_n_grid(),
        }
    }

    pub fn checks(&self) -> Vec<CheckKind> {
        self.checks
            .clone()
            .unwrap_or_else(|| self.scenario.default_checks())
    }

    pub fn grid_settings(&self) -> GridSettings {
        GridSettings {
            resolution: self.grid.resolution,
            fiber_resolution: self.grid.fiber_resolution,
            tolerance: self.tolerances.quadrature,
        }
    }

    /// Semantic checks after parsing; reports every problem found.
    pub fn validate(&self) -> Result<(), Vec<ConfigIssue>> {
        let mut issues = Vec::new();
        let mut positive = |path: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                issues.push(issue(path, format!("must be positive and finite, got {v}")));
            }
        };
        positive("dt", self.dt);
        positive("tolerances.quadrature", self.tolerances.quadrature);
        positive("tolerances.sigmas", self.tolerances.sigmas);
        positive("tolerances.entropy_slack", self.tolerances.entropy_slack);
        positive("tolerances.ks_level", self.tolerances.ks_level);
        positive("tightness.delta", self.tightness.delta);
        positive("tightness.horizon", self.tightness.horizon);
        positive("tightness.beta", self.tightness.beta);
        positive("tightness.entropy_time", self.tightness.entropy_time);
        positive("marginal.time", self.marginal.time);
        positive(
            "marginal.equilibration_time",
            self.marginal.equilibration_time,
        );
        if let StartSpec::Weighted { c } = self.start {
            positive("start.c", c);
        }
        for (i, &eta) in self.tightness.etas.iter().enumerate() {
            positive(&format!("tightness.etas[{i}]"), eta);
        }
        for (i, &t) in self.tightness.kolmogorov_times.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                issues.push(issue(
                    format!("tightness.kolmogorov_times[{i}]"),
                    format!("must be nonnegative, got {t}"),
                ));
            }
        }
        if !self.marginal.start.is_finite() {
            issues.push(issue("marginal.start", "must be finite"));
        }
        if self.tolerances.ks_level >= 1.0 {
            issues.push(issue("tolerances.ks_level", "must be below 1"));
        }
        let [lo, hi] = self.tolerances.decay_exponent;
        if !(lo <= hi) {
            issues.push(issue(
                "tolerances.decay_exponent",
                "lower end exceeds upper end",
            ));
        }
        let [lo, hi] = self.tightness.theta_range;
        if !(lo <= hi) {
            issues.push(issue(
                "tightness.theta_range",
                "lower end exceeds upper end",
            ));
        }
        if self.tightness.etas.is_empty() {
            issues.push(issue("tightness.etas", "must not be empty"));
        }
        if self.paths < 2 {
            issues.push(issue(
                "paths",
                format!("need at least 2 paths, got {}", self.paths),
            ));
        }
        if self.grid.resolution < 8 {
            issues.push(issue("grid.resolution", "must be at least 8"));
        }
        if self.grid.fiber_resolution < 4 {
            issues.push(issue("grid.fiber_resolution", "must be at least 4"));
        }
        if self.grid.cone_resolution < 4 {
            issues.push(issue("grid.cone_resolution", "must be at least 4"));
        }
        if self.pathlaw.bins < 4 {
            issues.push(issue("pathlaw.bins", "must be at least 4"));
        }
        for (i, step) in [self.marginal.time, self.marginal.equilibration_time]
            .iter()
            .enumerate()
        {
            let steps = step / self.dt;
            if self.dt > 0.0 && (steps - steps.round()).abs() > 1e-6 {
                let field = ["marginal.time", "marginal.equilibration_time"][i];
                issues.push(issue(
                    field,
                    format!("must be a whole number of steps of dt = {}", self.dt),
                ));
            }
        }

        if self.times.is_empty() {
            issues.push(issue("times", "need at least one time tuple"));
        }
        for (i, tuple) in self.times.iter().enumerate() {
            if tuple.is_empty() {
                issues.push(issue(format!("times[{i}]"), "empty time tuple"));
            }
            if tuple.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                issues.push(issue(
                    format!("times[{i}]"),
                    "times must be positive and finite",
                ));
            }
            if tuple.windows(2).any(|w| w[1] <= w[0]) {
                issues.push(issue(
                    format!("times[{i}]"),
                    "times must be strictly increasing",
                ));
            }
        }

        let grid = self.n_grid();
        if grid.is_empty() {
            issues.push(issue("n_grid", "must not be empty"));
        }
        if grid.contains(&0) {
            issues.push(issue("n_grid", "entries must be positive"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            issues.push(issue("n_grid", "must be strictly increasing"));
        }
        if self.scenario == ScenarioKind::ReflectedFamily && grid.iter().any(|&n| n < 2) {
            issues.push(issue("n_grid", "reflected_family needs n >= 2"));
        }

        for (i, check) in self.checks().iter().enumerate() {
            if !self.scenario.supports(*check) {
                issues.push(issue(
                    format!("checks[{i}]"),
                    format!("{check} does not apply to {}", self.scenario),
                ));
            }
        }
        if let Some(checks) = &self.checks {
            let mut seen = checks.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != checks.len() {
                issues.push(issue("checks", "a check is listed twice"));
            }
        }

        // every limit space has a one-coordinate chart
        let limit_dim = 1;
        if let Some(functions) = &self.test_functions {
            if functions.is_empty() {
                issues.push(issue("test_functions", "must not be empty"));
            }
            for (i, f) in functions.iter().enumerate() {
                let at = |field: &str| format!("test_functions[{i}].{field}");
                if !(f.scale.is_finite() && f.shift.is_finite() && f.fiber_weight.is_finite()) {
                    issues.push(issue(
                        format!("test_functions[{i}]"),
                        "scale, shift and fiber_weight must be finite",
                    ));
                }
                match &f.function {
                    FunctionShape::Constant { value } if !value.is_finite() => {
                        issues.push(issue(at("function.value"), "must be finite"))
                    }
                    FunctionShape::Cosine { frequency, phase }
                        if !(frequency.is_finite() && phase.is_finite()) =>
                    {
                        issues.push(issue(at("function"), "frequency and phase must be finite"))
                    }
                    FunctionShape::Hat {
                        center,
                        width,
                        height,
                    } => {
                        if center.len() != limit_dim {
                            issues.push(issue(
                                at("function.center"),
                                format!("needs {limit_dim} coordinate(s)"),
                            ));
                        }
                        if !(*width > 0.0 && width.is_finite()) {
                            issues.push(issue(
                                at("function.width"),
                                format!("must be positive, got {width}"),
                            ));
                        }
                        if !height.is_finite() {
                            issues.push(issue(at("function.height"), "must be finite"));
                        }
                    }
                    FunctionShape::DistanceCap { center, cap } => {
                        if center.len() != limit_dim {
                            issues.push(issue(
                                at("function.center"),
                                format!("needs {limit_dim} coordinate(s)"),
                            ));
                        }
                        if !(*cap > 0.0 && cap.is_finite()) {
                            issues.push(issue(
                                at("function.cap"),
                                format!("must be positive, got {cap}"),
                            ));
                        }
                    }
                    FunctionShape::Clamp { lo, hi }
                        if !(lo < hi && lo.is_finite() && hi.is_finite()) =>
                    {
                        issues.push(issue(at("function"), "need finite lo < hi"))
                    }
                    _ => {}
                }
            }
        }

        match (&self.custom, self.scenario) {
            (None, ScenarioKind::CustomFinite) => {
                issues.push(issue("custom", "custom_finite needs a custom family"))
            }
            (Some(_), kind) if kind != ScenarioKind::CustomFinite => issues.push(issue(
                "custom",
                format!("only used by custom_finite, not {kind}"),
            )),
            (Some(custom), _) => validate_custom(custom, self.n_grid.as_deref(), &mut issues),
            _ => {}
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

fn validate_finite(spec: &FiniteSpec, path: &str, issues: &mut Vec<ConfigIssue>) {
    let m = spec.weights.len();
    if m == 0 {
        issues.push(issue(format!("{path}.weights"), "need at least one atom"));
        return;
    }
    if spec.distances.len() != m || spec.distances.iter().any(|row| row.len() != m) {
        issues.push(issue(
            format!("{path}.distances"),
            format!("must be a {m} x {m} matrix"),
        ));
        return;
    }
    if spec.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        issues.push(issue(format!("{path}.weights"), "weights must be positive"));
    }
    if spec.base >= m {
        issues.push(issue(
            format!("{path}.base"),
            format!("index {} out of range", spec.base),
        ));
    }
    if let Some(c) = &spec.conductances {
        if c.len() != m || c.iter().any(|row| row.len() != m) {
            issues.push(issue(
                format!("{path}.conductances"),
                format!("must be a {m} x {m} matrix"),
            ));
        } else if (0..m).any(|i| {
            (0..m).any(|j| !(c[i][j] >= 0.0) || c[i][j] != c[j][i] || (i == j && c[i][j] != 0.0))
        }) {
            issues.push(issue(
                format!("{path}.conductances"),
                "need a symmetric nonnegative matrix with zero diagonal",
            ));
        }
    }
    for i in 0..m {
        for j in 0..m {
            let d = spec.distances[i][j];
            let bad = if i == j {
                d != 0.0
            } else {
                !(d > 0.0 && d.is_finite()) || d != spec.distances[j][i]
            };
            if bad {
                issues.push(issue(
                    format!("{path}.distances[{i}][{j}]"),
                    "need zero diagonal and positive symmetric entries",
                ));
                return;
            }
        }
    }
}

fn validate_custom(custom: &CustomFamily, n_grid: Option<&[usize]>, issues: &mut Vec<ConfigIssue>) {
    validate_finite(&custom.limit, "custom.limit", issues);
    if custom.members.is_empty() {
        issues.push(issue("custom.members", "need at least one member"));
    }
    if let Some(grid) = n_grid {
        if !grid.iter().eq(custom.members.iter().map(|m| &m.n)) {
            issues.push(issue(
                "n_grid",
                "must list the n of every custom member in order",
            ));
        }
    }
    let limit_len = custom.limit.weights.len();
    for (k, member) in custom.members.iter().enumerate() {
        let path = format!("custom.members[{k}]");
        let before = issues.len();
        validate_finite(&member.space, &format!("{path}.space"), issues);
        if member.map.len() != member.space.weights.len() {
            issues.push(issue(format!("{path}.map"), "needs one image per atom"));
        }
        if let Some(&bad) = member.map.iter().find(|&&j| j >= limit_len) {
            issues.push(issue(
                format!("{path}.map"),
                format!("image {bad} is not an atom of the limit"),
            ));
        }
        if issues.len() > before || custom.limit.distances.len() != limit_len {
            continue;
        }
        if member.map[member.space.base] != custom.limit.base {
            issues.push(issue(
                format!("{path}.map"),
                "must send the base atom to the limit's base atom",
            ));
        }
        let d = &member.space.distances;
        let dl = &custom.limit.distances;
        'pairs: for i in 0..d.len() {
            for j in 0..d.len() {
                if dl[member.map[i]][member.map[j]] > d[i][j] * (1.0 + 1e-12) {
                    issues.push(issue(
                        format!("{path}.map"),
                        format!("is not 1-Lipschitz on atoms {i}, {j}"),
                    ));
                    break 'pairs;
                }
            }
        }
    }
}
