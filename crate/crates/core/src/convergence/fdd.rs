use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{FamilyMember, LipschitzTestFunction, SpaceFamily};
use super::{heat_grid, trend, GridSettings, Trend};
use crate::heat::{HeatGrid, SpectralKernel};
use crate::spaces::{weighted_measure, CollapseMap, PmmSpace};
use crate::Result;

/// `𝒫_k(x) = P_{t₁}(f₁ P_{t₂−t₁}(f₂ ⋯ P_{t_k−t_{k−1}} f_k))(x)` on the
/// default grid of `space`. Times must be nonnegative and strictly
/// increasing.
pub fn fdd_operator(
    space: &PmmSpace,
    times: &[f64],
    fs: &[&dyn Fn(&[f64]) -> f64],
    x: &[f64],
) -> Result<f64> {
    let grid = heat_grid(&SpectralKernel::new(space)?, &GridSettings::default())?;
    grid.fdd_operator(times, fs, x)
}

/// Initial law of the processes compared by [`fdd_convergence_report`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartMode {
    /// Start at the base point `x̄_n`.
    Point,
    /// Start from the weighted probability measure `m̃_n` with constant `c`.
    Weighted { c: f64 },
}

/// The functions `f₁, …, f_k` applied at the `k` times of a report.
#[derive(Clone, Debug)]
pub struct FddProbe {
    pub label: String,
    pub functions: Vec<LipschitzTestFunction>,
}

impl FddProbe {
    pub fn new(label: impl Into<String>, functions: Vec<LipschitzTestFunction>) -> Self {
        FddProbe {
            label: label.into(),
            functions,
        }
    }

    /// The same function at every one of `k` times.
    pub fn repeated(f: LipschitzTestFunction, k: usize) -> Self {
        FddProbe {
            label: f.label().to_string(),
            functions: vec![f; k],
        }
    }

    /// `fiber · Σᵢ Lip(fᵢ) Πⱼ≠ᵢ sup|fⱼ|` plus the quadrature tolerance: the
    /// product functional moves by at most this much when every argument
    /// moves within a fibre.
    fn budget(&self, fiber: f64, tolerance: f64) -> f64 {
        let sups: Vec<f64> = self.functions.iter().map(|f| f.pulled_sup(fiber)).collect();
        let spread: f64 = (0..sups.len())
            .map(|i| {
                let others: f64 = sups
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, s)| s)
                    .product();
                self.functions[i].lipschitz() * others
            })
            .sum();
        fiber * spread + tolerance
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FddRow {
    pub n: usize,
    pub probe: String,
    pub k: usize,
    pub times: Vec<f64>,
    pub value: f64,
    pub limit_value: f64,
    pub gap: f64,
    pub budget: f64,
    pub within_budget: bool,
    /// `|𝒫_k| ≤ Πᵢ sup|fᵢ|` held.
    pub bounded: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FddReport {
    pub mode: StartMode,
    pub times: Vec<f64>,
    pub rows: Vec<FddRow>,
    /// Trend of the gaps over the members, per probe.
    pub trends: Vec<(String, Trend)>,
}

fn fdd_value(
    grid: &HeatGrid,
    times: &[f64],
    fs: &[&dyn Fn(&[f64]) -> f64],
    mode: StartMode,
) -> Result<f64> {
    match mode {
        StartMode::Point => grid.fdd_operator(times, fs, grid.space().base_point()),
        StartMode::Weighted { c } => {
            let g = grid.fdd_stage(times, fs)?;
            let v = if times[0] > 0.0 {
                grid.apply(times[0], &g)?
            } else {
                g
            };
            let masses = weighted_measure(grid.space(), c)?.on_quadrature(grid.nodes());
            let total: f64 = masses.iter().sum();
            Ok(masses.iter().zip(&v).map(|(m, x)| m * x).sum::<f64>() / total)
        }
    }
}

fn member_values(
    map: &CollapseMap,
    times: &[f64],
    probes: &[FddProbe],
    mode: StartMode,
    settings: &GridSettings,
) -> Result<Vec<f64>> {
    let grid = heat_grid(&SpectralKernel::new(map.source())?, settings)?;
    probes
        .iter()
        .map(|probe| {
            let pulled: Vec<_> = probe.functions.iter().map(|f| f.pullback(map)).collect();
            let refs: Vec<&dyn Fn(&[f64]) -> f64> =
                pulled.iter().map(|f| f as &dyn Fn(&[f64]) -> f64).collect();
            fdd_value(&grid, times, &refs, mode)
        })
        .collect()
}

/// Compares `𝒫_k^n` (pulled-back functions, started at `x̄_n` or from
/// `m̃_n`) with `𝒫_k^∞` for every member. Each row carries the fibre budget
/// `fiber_n · Σᵢ Lip(fᵢ) Πⱼ≠ᵢ sup|fⱼ| + tolerance`; the limit uses the same
/// grid settings as the members.
pub fn fdd_convergence_report(
    family: &SpaceFamily,
    times: &[f64],
    probes: &[FddProbe],
    mode: StartMode,
    settings: &GridSettings,
) -> Result<FddReport> {
    for probe in probes {
        if probe.functions.len() != times.len() {
            return Err(crate::Error::InvalidArgument(format!(
                "probe {} has {} functions for {} times",
                probe.label,
                probe.functions.len(),
                times.len()
            )));
        }
    }
    let limit_map = CollapseMap::identity(family.limit().clone());
    let limit_values = member_values(&limit_map, times, probes, mode, settings)?;
    let per_member: Vec<Vec<f64>> = family
        .members()
        .par_iter()
        .map(|m: &FamilyMember| member_values(&m.map, times, probes, mode, settings))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (member, values) in family.members().iter().zip(&per_member) {
        let fiber = member.map.fiber_diameter_bound();
        for ((probe, &value), &limit_value) in probes.iter().zip(values).zip(&limit_values) {
            let gap = (value - limit_value).abs();
            let budget = probe.budget(fiber, settings.tolerance);
            let bound: f64 = probe
                .functions
                .iter()
                .map(|f| f.pulled_sup(fiber))
                .product();
            rows.push(FddRow {
                n: member.n,
                probe: probe.label.clone(),
                k: times.len(),
                times: times.to_vec(),
                value,
                limit_value,
                gap,
                budget,
                within_budget: gap <= budget,
                bounded: value.abs() <= bound + 1e-9,
            });
        }
    }
    let trends = probes
        .iter()
        .map(|p| {
            let (gaps, budgets): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.probe == p.label)
                .map(|r| (r.gap, r.budget))
                .unzip();
            (p.label.clone(), trend(&gaps, &budgets))
        })
        .collect();
    Ok(FddReport {
        mode,
        times: times.to_vec(),
        rows,
        trends,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PmgRow {
    pub n: usize,
    pub function: String,
    pub integral: f64,
    pub limit_integral: f64,
    pub gap: f64,
    pub budget: f64,
    pub within_budget: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PmgReport {
    pub rows: Vec<PmgRow>,
    /// `(n, d_∞(π_n(x̄_n), x̄_∞))`.
    pub base_distances: Vec<(usize, f64)>,
    /// `(n, m_n(X_n))` on the grid, and the limit's total mass.
    pub masses: Vec<(usize, f64)>,
    pub limit_mass: f64,
    pub trends: Vec<(String, Trend)>,
}

/// Integrals `∫ f∘π_n dm_n` (with the fibre term) against `∫ f dm_∞`, base
/// point distances and total masses. The budget per row is
/// `Lip(f)·fiber_n + tolerance`.
pub fn pmg_test(
    family: &SpaceFamily,
    functions: &[LipschitzTestFunction],
    settings: &GridSettings,
) -> Result<PmgReport> {
    let limit_grid = heat_grid(&SpectralKernel::new(family.limit())?, settings)?;
    let limit_nodes = limit_grid.nodes();
    let limit_integrals: Vec<f64> = functions
        .iter()
        .map(|f| limit_nodes.integrate(|x| f.eval(x)))
        .collect();
    let limit_mass: f64 = limit_nodes.weights().iter().sum();

    let per_member: Vec<(Vec<f64>, f64)> = family
        .members()
        .par_iter()
        .map(|m| {
            let grid = heat_grid(&SpectralKernel::new(m.space())?, settings)?;
            let nodes = grid.nodes();
            let integrals = functions
                .iter()
                .map(|f| nodes.integrate(f.pullback(&m.map)))
                .collect();
            Ok((integrals, nodes.weights().iter().sum()))
        })
        .collect::<Result<_>>()?;

    let limit = family.limit();
    let mut rows = Vec::new();
    let mut base_distances = Vec::new();
    let mut masses = Vec::new();
    for (member, (integrals, mass)) in family.members().iter().zip(&per_member) {
        let fiber = member.map.fiber_diameter_bound();
        for ((f, &integral), &limit_integral) in
            functions.iter().zip(integrals).zip(&limit_integrals)
        {
            let gap = (integral - limit_integral).abs();
            let budget = f.lipschitz() * fiber + settings.tolerance;
            rows.push(PmgRow {
                n: member.n,
                function: f.label().to_string(),
                integral,
                limit_integral,
                gap,
                budget,
                within_budget: gap <= budget,
            });
        }
        let image = member.map.apply(member.space().base_point());
        base_distances.push((member.n, limit.distance(&image, limit.base_point())));
        masses.push((member.n, *mass));
    }
    let trends = functions
        .iter()
        .map(|f| {
            let (gaps, budgets): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.function == f.label())
                .map(|r| (r.gap, r.budget))
                .unzip();
            (f.label().to_string(), trend(&gaps, &budgets))
        })
        .collect();
    Ok(PmgReport {
        rows,
        base_distances,
        masses,
        limit_mass,
        trends,
    })
}
