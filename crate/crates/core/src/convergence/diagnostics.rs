use rayon::prelude::*;
use serde::Serialize;

use super::family::SpaceFamily;
use super::{heat_grid, GridSettings};
use crate::heat::{relative_entropy, HeatGrid, SpectralKernel};
use crate::spaces::{weighted_measure, CollapseMap, PmmSpace};
use crate::transport::{wasserstein_on_space, DiscreteMeasure};
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct EntropyRow {
    pub n: usize,
    pub entropy: f64,
}

/// `Ent_{m̃_n}(p_n(ε, x̄_n, ·) m_n)` over a family.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyTightness {
    pub eps: f64,
    pub rows: Vec<EntropyRow>,
    pub limit_entropy: f64,
    pub sup: f64,
    /// Allowed excess of `sup` over the limit's entropy.
    pub slack: f64,
    /// All entropies finite and `sup ≤ limit_entropy + slack`.
    pub bounded: bool,
}

fn normalized_weighted(grid: &HeatGrid, c: f64) -> Result<Vec<f64>> {
    let masses = weighted_measure(grid.space(), c)?.on_quadrature(grid.nodes());
    let total: f64 = masses.iter().sum();
    Ok(masses.iter().map(|m| m / total).collect())
}

fn kernel_entropy(space: &PmmSpace, eps: f64, c: f64, settings: &GridSettings) -> Result<f64> {
    let grid = heat_grid(&SpectralKernel::new(space)?, settings)?;
    let law = grid.transition_row(eps, space.base_point())?;
    Ok(relative_entropy(&law, &normalized_weighted(&grid, c)?))
}

/// Relative entropy of the time-`eps` kernel measure at the base point
/// with respect to `m̃_n` (constant `c` on sigma-finite spaces), computed
/// on each space's heat grid.
pub fn entropy_tightness(
    family: &SpaceFamily,
    eps: f64,
    c: f64,
    slack: f64,
    settings: &GridSettings,
) -> Result<EntropyTightness> {
    crate::error::check_time(eps)?;
    let limit_entropy = kernel_entropy(family.limit(), eps, c, settings)?;
    let rows: Vec<EntropyRow> = family
        .members()
        .par_iter()
        .map(|m| {
            Ok(EntropyRow {
                n: m.n,
                entropy: kernel_entropy(m.space(), eps, c, settings)?,
            })
        })
        .collect::<Result<_>>()?;
    let sup = rows
        .iter()
        .map(|r| r.entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    let bounded = rows.iter().all(|r| r.entropy.is_finite()) && sup <= limit_entropy + slack;
    Ok(EntropyTightness {
        eps,
        rows,
        limit_entropy,
        sup,
        slack,
        bounded,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InitialLawRow {
    pub n: usize,
    pub w1: f64,
    pub fiber_bound: f64,
}

/// `m̃` on the heat-grid nodes of its space, pushed through `map`.
fn mapped_weighted(map: &CollapseMap, c: f64, settings: &GridSettings) -> Result<DiscreteMeasure> {
    let grid = heat_grid(&SpectralKernel::new(map.source())?, settings)?;
    let masses = normalized_weighted(&grid, c)?;
    let nodes = grid.nodes();
    let atoms = (0..nodes.len())
        .map(|i| map.apply(nodes.point(i)))
        .collect();
    DiscreteMeasure::normalized(map.target().chart_dim(), atoms, masses)
}

/// `W₁(π_n # m̃_n, m̃_∞)` with both measures discretized on heat grids of
/// the same settings.
pub fn initial_law_w1(
    family: &SpaceFamily,
    c: f64,
    settings: &GridSettings,
) -> Result<Vec<InitialLawRow>> {
    let limit = mapped_weighted(&CollapseMap::identity(family.limit().clone()), c, settings)?;
    family
        .members()
        .par_iter()
        .map(|m| {
            let mapped = mapped_weighted(&m.map, c, settings)?;
            Ok(InitialLawRow {
                n: m.n,
                w1: wasserstein_on_space(family.limit(), 1.0, &mapped, &limit)?,
                fiber_bound: m.map.fiber_diameter_bound(),
            })
        })
        .collect()
}
