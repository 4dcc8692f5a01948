use std::f64::consts::PI;

use mmlab::convergence::{
    entropy_tightness, fdd_convergence_report, initial_law_w1, pathlaw_w1, pmg_test, trend,
    FamilyMember, FddProbe, GridSettings, LipschitzTestFunction, PathLawSettings, SpaceFamily,
    StartMode, Trend,
};
use mmlab::heat::SpectralKernel;
use mmlab::numeric::{ks_pvalue, ks_statistic, linear_fit, normal_cdf, std_dev};
use mmlab::paths::{
    euler_maruyama, kolmogorov_moment, modulus_statistic, reflected_em, sample_kernel_chain,
    Boundary, InitialLaw, PathEnsemble, SdeConfig,
};
use mmlab::rng::{derive_seed, path_stream};
use mmlab::spaces::{CollapseMap, ConvexDomain, FiniteMms, MassMode, PmmSpace, Potential};
use mmlab::transport::{wasserstein_1d, DiscreteMeasure};
use rand::Rng;

use crate::config::{
    CheckKind, ConfigIssue, CustomFamily, FiniteSpec, FunctionShape, ScenarioConfig, ScenarioKind,
    StartSpec, TestFunctionSpec,
};
use crate::report::{CheckResult, CheckRow, Fingerprint, ScenarioReport, Status};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),
    #[error(transparent)]
    Core(#[from] mmlab::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

type CheckOutcome = mmlab::Result<(Vec<CheckRow>, Vec<String>)>;

/// Builds the family described by `config`.
pub fn build_family(config: &ScenarioConfig) -> mmlab::Result<SpaceFamily> {
    let ns = config.n_grid();
    match config.scenario {
        ScenarioKind::TorusCollapse => SpaceFamily::torus(&ns),
        ScenarioKind::ConeInterval => SpaceFamily::cone(&ns, config.grid.cone_resolution),
        ScenarioKind::OuFamily => SpaceFamily::ou(&ns),
        ScenarioKind::ReflectedFamily => SpaceFamily::reflected(&ns),
        ScenarioKind::CustomFinite => {
            let custom = config.custom.as_ref().ok_or_else(|| {
                mmlab::Error::InvalidArgument("custom_finite needs a custom family".into())
            })?;
            custom_family(custom)
        }
    }
}

fn finite_space(spec: &FiniteSpec) -> mmlab::Result<PmmSpace> {
    let dist: Vec<f64> = spec.distances.iter().flatten().copied().collect();
    let mut space = FiniteMms::new(dist, spec.weights.clone(), spec.base)?;
    if let Some(c) = &spec.conductances {
        space = space.with_conductance(c.iter().flatten().copied().collect())?;
    }
    PmmSpace::finite(space)?.with_mass_mode(MassMode::Normalized)
}

fn custom_family(custom: &CustomFamily) -> mmlab::Result<SpaceFamily> {
    let limit = finite_space(&custom.limit)?;
    let members = custom
        .members
        .iter()
        .map(|m| {
            let source = finite_space(&m.space)?;
            let image = m.map.clone();
            // largest distance between atoms sharing an image
            let mut fiber: f64 = 0.0;
            for i in 0..image.len() {
                for j in 0..image.len() {
                    if image[i] == image[j] {
                        fiber = fiber.max(m.space.distances[i][j]);
                    }
                }
            }
            let map = CollapseMap::new(
                source,
                limit.clone(),
                fiber,
                move |x: &[f64]| vec![image[x[0] as usize] as f64],
                |_: &[f64]| 0.0,
            );
            Ok(FamilyMember { n: m.n, map })
        })
        .collect::<mmlab::Result<Vec<_>>>()?;
    SpaceFamily::new("custom_finite", limit, members)
}

/// Test functions used when the config lists none.
pub fn default_test_functions(kind: ScenarioKind, family: &SpaceFamily) -> Vec<TestFunctionSpec> {
    use FunctionShape::*;
    match kind {
        ScenarioKind::TorusCollapse => vec![
            TestFunctionSpec::new(Cosine {
                frequency: 1.0,
                phase: 0.0,
            })
            .scaled(0.5, 1.0)
            .with_fiber_weight(0.5),
            TestFunctionSpec::new(Hat {
                center: vec![PI],
                width: 1.0,
                height: 1.0,
            })
            .with_fiber_weight(0.5),
            TestFunctionSpec::new(Constant { value: 1.0 }).with_fiber_weight(0.5),
        ],
        ScenarioKind::ConeInterval => vec![
            TestFunctionSpec::new(DistanceCap {
                center: vec![0.0],
                cap: 1.0,
            }),
            TestFunctionSpec::new(Hat {
                center: vec![0.5],
                width: 0.25,
                height: 1.0,
            }),
            TestFunctionSpec::new(Cosine {
                frequency: PI,
                phase: 0.0,
            }),
        ],
        // the hat sits inside every [0, 1 − 1/n], n ≥ 2
        ScenarioKind::ReflectedFamily => vec![
            TestFunctionSpec::new(DistanceCap {
                center: vec![0.0],
                cap: 1.0,
            }),
            TestFunctionSpec::new(Hat {
                center: vec![0.25],
                width: 0.25,
                height: 1.0,
            }),
            TestFunctionSpec::new(Cosine {
                frequency: PI,
                phase: 0.0,
            }),
        ],
        ScenarioKind::OuFamily => vec![
            TestFunctionSpec::new(DistanceCap {
                center: vec![0.0],
                cap: 1.0,
            }),
            TestFunctionSpec::new(Clamp { lo: -1.0, hi: 1.0 }),
            TestFunctionSpec::new(Cosine {
                frequency: 1.0,
                phase: 0.0,
            }),
        ],
        ScenarioKind::CustomFinite => {
            let limit = family.limit();
            let base = limit.base_point().to_vec();
            let diameter = limit
                .finite_space()
                .map(|f| f.distances().iter().copied().fold(0.0, f64::max))
                .unwrap_or(1.0)
                .max(1e-12);
            vec![
                TestFunctionSpec::new(DistanceCap {
                    center: base.clone(),
                    cap: diameter,
                }),
                TestFunctionSpec::new(Hat {
                    center: base,
                    width: diameter,
                    height: 1.0,
                }),
                TestFunctionSpec::new(Constant { value: 1.0 }),
            ]
        }
    }
}

pub fn build_test_function(spec: &TestFunctionSpec, limit: &PmmSpace) -> LipschitzTestFunction {
    let base = match &spec.function {
        FunctionShape::Constant { value } => LipschitzTestFunction::constant(*value),
        FunctionShape::Cosine { frequency, phase } => {
            LipschitzTestFunction::cosine(*frequency, *phase)
        }
        FunctionShape::Hat {
            center,
            width,
            height,
        } => LipschitzTestFunction::hat(limit, center.clone(), *width, *height),
        FunctionShape::DistanceCap { center, cap } => {
            LipschitzTestFunction::distance_cap(limit, center.clone(), *cap)
        }
        FunctionShape::Clamp { lo, hi } => LipschitzTestFunction::clamp(*lo, *hi),
    };
    let scaled = if spec.scale == 1.0 && spec.shift == 0.0 {
        base
    } else {
        base.scaled(spec.scale, spec.shift)
    };
    if spec.fiber_weight == 0.0 {
        scaled
    } else {
        scaled.with_fiber_weight(spec.fiber_weight)
    }
}

/// Runs every configured check. Runtime failures of a single check are
/// recorded in `problems` and leave the report incomplete.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport, RunError> {
    config.validate().map_err(RunError::Config)?;
    let family = build_family(config)?;
    let specs = config
        .test_functions
        .clone()
        .unwrap_or_else(|| default_test_functions(config.scenario, &family));
    let functions: Vec<LipschitzTestFunction> = specs
        .iter()
        .map(|s| build_test_function(s, family.limit()))
        .collect();
    let run = Run {
        config,
        family: &family,
        functions: &functions,
        grid: config.grid_settings(),
    };

    let mut checks = Vec::new();
    let mut problems = Vec::new();
    for kind in config.checks() {
        let seed = derive_seed(config.seed, kind.seed_tag());
        let outcome = match kind {
            CheckKind::Pmg => run.pmg(),
            CheckKind::Fdd => run.fdd(),
            CheckKind::Pathlaw => run.pathlaw(seed),
            CheckKind::Entropy => run.entropy(),
            CheckKind::InitialLaw => run.initial_law(),
            CheckKind::Modulus => run.modulus(seed),
            CheckKind::Kolmogorov => run.kolmogorov(seed),
            CheckKind::Marginal => run.marginal(seed),
            CheckKind::Occupation => run.occupation(seed),
        };
        let stochastic = matches!(
            kind,
            CheckKind::Pathlaw
                | CheckKind::Modulus
                | CheckKind::Kolmogorov
                | CheckKind::Marginal
                | CheckKind::Occupation
        );
        let seed = stochastic.then_some(seed);
        match outcome {
            Ok((rows, issues)) => {
                problems.extend(issues.into_iter().map(|p| format!("{kind}: {p}")));
                checks.push(CheckResult::new(kind, seed, rows));
            }
            Err(e) => {
                problems.push(format!("{kind}: {e}"));
                let row = CheckRow::new(None, "error", f64::NAN)
                    .status(Status::Fail)
                    .note(e.to_string());
                checks.push(CheckResult::new(kind, seed, vec![row]));
            }
        }
    }
    Ok(ScenarioReport {
        scenario: config.scenario.as_str().to_string(),
        complete: problems.is_empty(),
        problems,
        checks,
        fingerprint: Fingerprint::of(config),
    })
}

struct Run<'a> {
    config: &'a ScenarioConfig,
    family: &'a SpaceFamily,
    functions: &'a [LipschitzTestFunction],
    grid: GridSettings,
}

fn trend_row(label: &str, gaps: &[f64], budgets: &[f64]) -> CheckRow {
    let shape = trend(gaps, budgets);
    let note = match shape {
        Trend::StrictlyDecreasing => "strictly_decreasing",
        Trend::DecreasingWithinBudget => "decreasing_within_budget",
        Trend::NotDecreasing => "not_decreasing",
        Trend::InsufficientPoints => "insufficient points",
    };
    let status = match shape.holds() {
        Some(h) => Status::from_bool(h),
        None => Status::Skipped,
    };
    CheckRow::new(
        None,
        format!("{label} trend"),
        gaps.last().copied().unwrap_or(f64::NAN),
    )
    .status(status)
    .note(note)
}

impl Run<'_> {
    fn start(&self) -> StartMode {
        match self.config.start {
            StartSpec::Point => StartMode::Point,
            StartSpec::Weighted { c } => StartMode::Weighted { c },
        }
    }

    /// Constant of `m̃`; point starts still need one for the measure checks.
    fn weight_constant(&self) -> f64 {
        match self.config.start {
            StartSpec::Point => 1.0,
            StartSpec::Weighted { c } => c,
        }
    }

    fn start_law(&self, space: &PmmSpace) -> InitialLaw {
        match self.config.start {
            StartSpec::Point => InitialLaw::Point(space.base_point().to_vec()),
            StartSpec::Weighted { c } => InitialLaw::Weighted { c },
        }
    }

    fn fiber(&self, n: usize) -> f64 {
        self.family
            .members()
            .iter()
            .find(|m| m.n == n)
            .map_or(0.0, |m| m.map.fiber_diameter_bound())
    }

    /// Rows of a budgeted comparison: families without collapsing fibres
    /// have no budget and are judged by the trend alone.
    fn budgeted(&self, row: CheckRow, n: usize, gap: f64, budget: f64) -> CheckRow {
        if self.fiber(n) > 0.0 {
            row.bounded(gap, budget)
        } else {
            row.gap(gap).note("no fibre budget; judged by trend")
        }
    }

    fn pmg(&self) -> CheckOutcome {
        let report = pmg_test(self.family, self.functions, &self.grid)?;
        let mut rows: Vec<CheckRow> = report
            .rows
            .iter()
            .map(|r| {
                let row = CheckRow::new(Some(r.n), r.function.clone(), r.integral);
                self.budgeted(row, r.n, r.gap, r.budget)
            })
            .collect();
        for (&(n, d), &(_, mass)) in report.base_distances.iter().zip(&report.masses) {
            let gap = (mass - report.limit_mass).abs();
            rows.push(
                CheckRow::new(Some(n), "base point distance", d).bounded(d, self.grid.tolerance),
            );
            rows.push(self.budgeted(
                CheckRow::new(Some(n), "total mass", mass),
                n,
                gap,
                self.grid.tolerance,
            ));
        }
        for f in self.functions {
            let (gaps, budgets): (Vec<f64>, Vec<f64>) = report
                .rows
                .iter()
                .filter(|r| r.function == f.label())
                .map(|r| (r.gap, r.budget))
                .unzip();
            rows.push(trend_row(f.label(), &gaps, &budgets));
        }
        Ok((rows, Vec::new()))
    }

    fn fdd(&self) -> CheckOutcome {
        let mut rows = Vec::new();
        for times in &self.config.times {
            let probes: Vec<FddProbe> = self
                .functions
                .iter()
                .map(|f| FddProbe::repeated(f.clone(), times.len()))
                .collect();
            let report =
                fdd_convergence_report(self.family, times, &probes, self.start(), &self.grid)?;
            for r in &report.rows {
                let row = CheckRow::new(Some(r.n), r.probe.clone(), r.value).times(times);
                let row = if r.bounded {
                    row
                } else {
                    row.note("test function bound exceeded")
                };
                rows.push(self.budgeted(row, r.n, r.gap, r.budget));
            }
            for probe in &probes {
                let (gaps, budgets): (Vec<f64>, Vec<f64>) = report
                    .rows
                    .iter()
                    .filter(|r| r.probe == probe.label)
                    .map(|r| (r.gap, r.budget))
                    .unzip();
                rows.push(trend_row(&probe.label, &gaps, &budgets).times(times));
            }
        }
        Ok((rows, Vec::new()))
    }

    fn all_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.config.times.iter().flatten().copied().collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    fn chain(&self, space: &PmmSpace, times: &[f64], seed: u64) -> mmlab::Result<PathEnsemble> {
        let kernel = SpectralKernel::new(space)?;
        sample_kernel_chain(
            &kernel,
            &self.start_law(space),
            times,
            self.config.paths,
            seed,
        )
    }

    fn pathlaw(&self, seed: u64) -> CheckOutcome {
        let grid = self.all_times();
        let limit = self.family.limit();
        let reference = self.chain(limit, &grid, derive_seed(seed, 0))?;
        let replica = self.chain(limit, &grid, derive_seed(seed, u64::MAX))?;
        let identity = CollapseMap::identity(limit.clone());
        let settings = PathLawSettings {
            bins: self.config.pathlaw.bins,
            bootstrap: self.config.pathlaw.bootstrap,
            seed,
        };
        let sigmas = self.config.tolerances.sigmas;
        let mut rows = Vec::new();
        for times in &self.config.times {
            let baseline = pathlaw_w1(&replica, &reference, times, &identity, &settings)?;
            rows.push(
                CheckRow::new(None, "baseline", baseline.value)
                    .times(times)
                    .status(Status::Skipped)
                    .note("independent limit ensembles"),
            );
            for member in self.family.members() {
                let ensemble =
                    self.chain(member.space(), &grid, derive_seed(seed, member.n as u64))?;
                let w = pathlaw_w1(&ensemble, &reference, times, &member.map, &settings)?;
                let budget = w.fiber_budget
                    + w.binning_slack
                    + baseline.binning_slack
                    + sigmas * w.standard_error;
                rows.push(
                    CheckRow::new(Some(member.n), "w1", w.value)
                        .times(times)
                        .bounded(w.value - baseline.value, budget),
                );
            }
        }
        Ok((rows, Vec::new()))
    }

    fn entropy(&self) -> CheckOutcome {
        let slack = self.config.tolerances.entropy_slack;
        let eps = self.config.tightness.entropy_time;
        let report =
            entropy_tightness(self.family, eps, self.weight_constant(), slack, &self.grid)?;
        let mut rows = vec![CheckRow::new(None, "entropy", report.limit_entropy)
            .status(Status::Skipped)
            .note("limit")];
        for r in &report.rows {
            let row = CheckRow::new(Some(r.n), "entropy", r.entropy);
            rows.push(if r.entropy.is_finite() {
                row.bounded(r.entropy - report.limit_entropy, slack)
            } else {
                row.status(Status::Fail).note("infinite entropy")
            });
        }
        Ok((rows, Vec::new()))
    }

    fn initial_law(&self) -> CheckOutcome {
        let law = initial_law_w1(self.family, self.weight_constant(), &self.grid)?;
        let tol = self.grid.tolerance;
        let mut rows: Vec<CheckRow> = law
            .iter()
            .map(|r| {
                self.budgeted(
                    CheckRow::new(Some(r.n), "w1", r.w1),
                    r.n,
                    r.w1,
                    r.fiber_bound + tol,
                )
            })
            .collect();
        let gaps: Vec<f64> = law.iter().map(|r| r.w1).collect();
        rows.push(trend_row("w1", &gaps, &vec![tol; gaps.len()]));
        Ok((rows, Vec::new()))
    }

    /// Uniform grid on `[0, horizon]` with step `min η / 4`.
    fn tightness_grid(&self, horizon: f64) -> Vec<f64> {
        let step = self.tightness_step();
        let steps = (horizon / step - 1e-9).ceil() as usize;
        (0..=steps).map(|i| i as f64 * step).collect()
    }

    fn tightness_step(&self) -> f64 {
        self.config
            .tightness
            .etas
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
            / 4.0
    }

    fn modulus(&self, seed: u64) -> CheckOutcome {
        let spec = &self.config.tightness;
        let grid = self.tightness_grid(spec.horizon);
        let horizon = *grid.last().expect("grid has a point");
        let mut spaces: Vec<(Option<usize>, &PmmSpace)> = self
            .family
            .members()
            .iter()
            .map(|m| (Some(m.n), m.space()))
            .collect();
        spaces.push((None, self.family.limit()));
        let mut rows = Vec::new();
        let mut sup = vec![0.0f64; spec.etas.len()];
        for (n, space) in spaces {
            let ensemble =
                self.chain(space, &grid, derive_seed(seed, n.map_or(0, |n| n as u64)))?;
            let mut previous = f64::INFINITY;
            for (i, &eta) in spec.etas.iter().enumerate() {
                let m = modulus_statistic(&ensemble, horizon, eta, spec.delta)?;
                sup[i] = sup[i].max(m.value);
                let row = CheckRow::new(n, format!("eta={eta}"), m.value)
                    .status(Status::from_bool(m.value <= previous));
                rows.push(row.note(format!("se={}", m.standard_error)));
                previous = m.value;
            }
        }
        let mut previous = f64::INFINITY;
        for (&eta, &s) in spec.etas.iter().zip(&sup) {
            rows.push(
                CheckRow::new(None, format!("sup over family, eta={eta}"), s)
                    .status(Status::from_bool(s <= previous)),
            );
            previous = s;
        }
        Ok((rows, Vec::new()))
    }

    fn kolmogorov(&self, seed: u64) -> CheckOutcome {
        let spec = &self.config.tightness;
        let step = self.tightness_step();
        let h_grid: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|k| k * step).collect();
        let last = spec.kolmogorov_times.iter().copied().fold(0.0, f64::max) + h_grid[3];
        let grid = self.tightness_grid(last);
        let ensemble = self.chain(self.family.limit(), &grid, seed)?;
        let table = kolmogorov_moment(&ensemble, spec.beta, &spec.kolmogorov_times, &h_grid)?;
        let mut rows: Vec<CheckRow> = table
            .by_h
            .iter()
            .map(|&(h, moment, se)| {
                CheckRow::new(None, format!("moment h={h}"), moment)
                    .status(Status::Skipped)
                    .note(format!("se={se}"))
            })
            .collect();
        let [lo, hi] = spec.theta_range;
        rows.push(
            CheckRow::new(None, "theta", table.theta)
                .status(Status::from_bool(table.theta >= lo && table.theta <= hi))
                .note(format!("C={}", table.c)),
        );
        Ok((rows, Vec::new()))
    }

    fn marginal(&self, seed: u64) -> CheckOutcome {
        match self.config.scenario {
            ScenarioKind::OuFamily => self.ou_marginal(seed),
            _ => self.reflected_marginal(seed),
        }
    }

    fn sde_config(&self, horizon: f64) -> mmlab::Result<SdeConfig> {
        let config = SdeConfig::new(self.config.dt, horizon);
        let steps = config.steps()?;
        Ok(config.record_every(steps))
    }

    /// Endpoint of every path, by path id; diverged paths are reported.
    fn endpoints(
        ensemble: &PathEnsemble,
        problems: &mut Vec<String>,
        label: &str,
    ) -> mmlab::Result<Vec<f64>> {
        if !ensemble.diverged().is_empty() {
            problems.push(format!(
                "{label}: {} diverged paths",
                ensemble.diverged().len()
            ));
        }
        if ensemble.is_empty() {
            return Err(mmlab::Error::InvalidArgument(format!(
                "{label}: every path diverged"
            )));
        }
        let t = *ensemble.times().last().expect("grid has a point");
        Ok(ensemble.marginal(t)?.into_iter().map(|x| x[0]).collect())
    }

    /// Empirical `W_p` between coupled samples and its bootstrap standard
    /// error; replicates resample path ids jointly.
    fn coupled_wp(&self, p: f64, a: &[f64], b: &[f64], seed: u64) -> mmlab::Result<(f64, f64)> {
        let wp = |x: Vec<f64>, y: Vec<f64>| -> mmlab::Result<f64> {
            wasserstein_1d(
                p,
                &DiscreteMeasure::uniform(1, to_atoms(x))?,
                &DiscreteMeasure::uniform(1, to_atoms(y))?,
            )
        };
        let value = wp(a.to_vec(), b.to_vec())?;
        let replicates = self.config.pathlaw.bootstrap;
        if replicates < 2 || a.len() != b.len() {
            return Ok((value, 0.0));
        }
        let mut draws = Vec::with_capacity(replicates);
        for r in 0..replicates as u64 {
            let mut rng = path_stream(seed, r);
            let picks: Vec<usize> = (0..a.len()).map(|_| rng.random_range(0..a.len())).collect();
            draws.push(wp(
                picks.iter().map(|&i| a[i]).collect(),
                picks.iter().map(|&i| b[i]).collect(),
            )?);
        }
        Ok((value, std_dev(&draws)))
    }

    /// Euler–Maruyama endpoints of the OU family with common Brownian
    /// increments, against the Gaussian closed forms.
    fn ou_marginal(&self, seed: u64) -> CheckOutcome {
        let m = &self.config.marginal;
        let sde = self.sde_config(m.time)?;
        let steps = sde.steps()?;
        let (dt, t, x0) = (self.config.dt, m.time, m.start);
        let sigmas = self.config.tolerances.sigmas;
        let tol = self.grid.tolerance;
        let mut problems = Vec::new();
        let endpoints =
            |alpha: f64, problems: &mut Vec<String>, label: &str| -> mmlab::Result<Vec<f64>> {
                let e = euler_maruyama(
                    &Potential::quadratic(alpha),
                    &[x0],
                    &sde,
                    self.config.paths,
                    seed,
                )?;
                Self::endpoints(&e, problems, label)
            };
        // exact law of the SDE and of its Euler–Maruyama chain (both Gaussian)
        let exact = |alpha: f64| {
            (
                x0 * (-alpha * t).exp(),
                ((1.0 - (-2.0 * alpha * t).exp()) / alpha).sqrt(),
            )
        };
        let scheme = |alpha: f64| {
            let r: f64 = 1.0 - alpha * dt;
            let k = steps as i32;
            (
                x0 * r.powi(k),
                (2.0 * dt * (1.0 - r.powi(2 * k)) / (1.0 - r * r)).sqrt(),
            )
        };
        let limit = endpoints(1.0, &mut problems, "limit")?;
        let mut rows = Vec::new();
        let mut series: [(Vec<f64>, Vec<f64>, Vec<f64>); 2] = Default::default();
        for member in self.family.members() {
            let alpha = 1.0 + 1.0 / member.n as f64;
            let sample = endpoints(alpha, &mut problems, &format!("n={}", member.n))?;
            for (slot, p) in [1.0, 2.0].into_iter().enumerate() {
                let closed = |a: (f64, f64), b: (f64, f64)| gaussian_wp(p, a, b);
                let reference = closed(exact(alpha), exact(1.0));
                let bias = (closed(scheme(alpha), scheme(1.0)) - reference).abs();
                let (value, se) =
                    self.coupled_wp(p, &sample, &limit, derive_seed(seed, member.n as u64))?;
                let label = if p == 1.0 { "w1" } else { "w2" };
                rows.push(
                    CheckRow::new(Some(member.n), label, value)
                        .times(&[t])
                        .bounded((value - reference).abs(), bias + sigmas * se + tol)
                        .note(format!("closed form {reference}")),
                );
                series[slot].0.push(member.n as f64);
                series[slot].1.push(value);
                series[slot].2.push(sigmas * se);
            }
        }
        let [lo, hi] = self.config.tolerances.decay_exponent;
        for (label, (ns, values, budgets)) in ["w1", "w2"].iter().zip(&series) {
            rows.push(trend_row(label, values, budgets).times(&[t]));
            if values.len() >= 2 && values.iter().all(|v| *v > 0.0) {
                let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
                let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
                let exponent = -linear_fit(&xs, &ys).0;
                rows.push(
                    CheckRow::new(None, format!("{label} decay exponent"), exponent)
                        .times(&[t])
                        .status(Status::from_bool(exponent >= lo && exponent <= hi)),
                );
            }
        }
        Ok((rows, problems))
    }

    /// Reflected Euler–Maruyama on `[0, 1 − 1/n]` and `[0, 1]` with common
    /// Brownian increments; gaps must decrease in `n`.
    fn reflected_marginal(&self, seed: u64) -> CheckOutcome {
        let m = &self.config.marginal;
        let sde = self.sde_config(m.time)?;
        let sigmas = self.config.tolerances.sigmas;
        let mut problems = Vec::new();
        let endpoints =
            |hi: f64, problems: &mut Vec<String>, label: &str| -> mmlab::Result<Vec<f64>> {
                let domain = ConvexDomain::interval(0.0, hi);
                let start = m.start.clamp(0.0, hi);
                let e = reflected_em(
                    &domain,
                    &Potential::Zero,
                    &[start],
                    &sde,
                    Boundary::Reflect,
                    self.config.paths,
                    seed,
                )?;
                Self::endpoints(&e, problems, label)
            };
        let limit = endpoints(1.0, &mut problems, "limit")?;
        let mut rows = Vec::new();
        let (mut values, mut budgets) = (Vec::new(), Vec::new());
        for member in self.family.members() {
            let hi = 1.0 - 1.0 / member.n as f64;
            let sample = endpoints(hi, &mut problems, &format!("n={}", member.n))?;
            let (value, se) =
                self.coupled_wp(1.0, &sample, &limit, derive_seed(seed, member.n as u64))?;
            rows.push(
                CheckRow::new(Some(member.n), "w1", value)
                    .times(&[m.time])
                    .status(Status::Skipped)
                    .note(format!("se={se}; judged by trend")),
            );
            values.push(value);
            budgets.push(sigmas * se);
        }
        rows.push(trend_row("w1", &values, &budgets).times(&[m.time]));
        Ok((rows, problems))
    }

    /// Kolmogorov–Smirnov test of the reflected endpoints on `[0, 1]` at the
    /// equilibration time against the uniform law.
    fn occupation(&self, seed: u64) -> CheckOutcome {
        let m = &self.config.marginal;
        let sde = self.sde_config(m.equilibration_time)?;
        let start = m.start.clamp(0.0, 1.0);
        let domain = ConvexDomain::interval(0.0, 1.0);
        let e = reflected_em(
            &domain,
            &Potential::Zero,
            &[start],
            &sde,
            Boundary::Reflect,
            self.config.paths,
            seed,
        )?;
        let mut problems = Vec::new();
        let sample = Self::endpoints(&e, &mut problems, "limit")?;
        let d = ks_statistic(&sample, |x| x.clamp(0.0, 1.0));
        let p = ks_pvalue(d, sample.len());
        let level = self.config.tolerances.ks_level;
        let row = CheckRow::new(None, "ks statistic", d)
            .times(&[m.equilibration_time])
            .status(Status::from_bool(p > level))
            .note(format!("p={p}; level={level}"));
        Ok((vec![row], problems))
    }
}

fn to_atoms(x: Vec<f64>) -> Vec<Vec<f64>> {
    x.into_iter().map(|v| vec![v]).collect()
}

/// `W_p` between `N(m₁, s₁²)` and `N(m₂, s₂²)` for `p ∈ {1, 2}`.
fn gaussian_wp(p: f64, (m1, s1): (f64, f64), (m2, s2): (f64, f64)) -> f64 {
    let (a, b) = (m1 - m2, s1 - s2);
    if p == 2.0 {
        (a * a + b * b).sqrt()
    } else if b == 0.0 {
        a.abs()
    } else {
        // E|a + bZ|
        let s = b.abs();
        s * (2.0 / PI).sqrt() * (-0.5 * (a / s).powi(2)).exp()
            + a * (1.0 - 2.0 * normal_cdf(-a / s))
    }
}
