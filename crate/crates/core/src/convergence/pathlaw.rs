use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use crate::numeric::std_dev;
use crate::paths::{fdd_metric, PathEnsemble};
use crate::rng::path_stream;
use crate::spaces::{CollapseMap, PmmSpace, SpaceKind};
use crate::transport::{grid_w1, wasserstein_exact, DiscreteMeasure};
use crate::{Error, Result};

/// Largest binning grid accepted by [`pathlaw_w1`].
pub const MAX_GRID_NODES: usize = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLawSettings {
    /// Bins per axis of the product chart.
    pub bins: usize,
    /// Bootstrap replicates for the standard error (0 disables it).
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for PathLawSettings {
    fn default() -> Self {
        PathLawSettings {
            bins: 48,
            bootstrap: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathLawW1 {
    pub times: Vec<f64>,
    /// `W₁` between the binned mapped fdd and the binned limit fdd under the
    /// sum metric over times.
    pub value: f64,
    /// Bootstrap standard deviation of `value` over resampled paths.
    pub standard_error: f64,
    /// `k · fibre bound`.
    pub fiber_budget: f64,
    /// Largest change of `value` caused by moving atoms to bin centres
    /// (0 on finite spaces, where atoms are compared exactly).
    pub binning_slack: f64,
    pub bins: usize,
    pub paths: [usize; 2],
}

/// Per chart coordinate: `Some(L)` for a periodic coordinate of period `L`.
fn periods(space: &PmmSpace) -> Vec<Option<f64>> {
    match space.kind() {
        SpaceKind::Circle { circumference } => vec![Some(*circumference)],
        SpaceKind::Torus { first, second } => vec![Some(*first), Some(*second)],
        _ => vec![None; space.chart_dim()],
    }
}

struct Binning {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    periodic: Vec<bool>,
    /// Flat bin of every path, per ensemble.
    cells: [Vec<usize>; 2],
}

impl Binning {
    fn histogram(&self, side: usize, picks: &[usize]) -> Vec<f64> {
        let nodes: usize = self.shape.iter().product();
        let mut h = vec![0.0; nodes];
        let w = 1.0 / picks.len() as f64;
        for &p in picks {
            h[self.cells[side][p]] += w;
        }
        h
    }

    fn distance(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        grid_w1(
            &self.histogram(0, a),
            &self.histogram(1, b),
            &self.shape,
            &self.spacing,
            &self.periodic,
        )
    }
}

/// Empirical fdds on a finite space: distinct tuples compared exactly.
struct Tuples {
    atoms: Vec<Vec<f64>>,
    cells: [Vec<usize>; 2],
}

impl Tuples {
    fn new(samples: [&[Vec<f64>]; 2]) -> Self {
        let mut ids: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut atoms = Vec::new();
        let mut cells = [Vec::new(), Vec::new()];
        for (side, sample) in samples.iter().enumerate() {
            for x in sample.iter() {
                let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                let id = *ids.entry(key).or_insert_with(|| {
                    atoms.push(x.clone());
                    atoms.len() - 1
                });
                cells[side].push(id);
            }
        }
        Tuples { atoms, cells }
    }

    fn measure(&self, side: usize, picks: &[usize]) -> Result<DiscreteMeasure> {
        let mut mass = vec![0.0; self.atoms.len()];
        for &p in picks {
            mass[self.cells[side][p]] += 1.0 / picks.len() as f64;
        }
        let (atoms, weights): (Vec<Vec<f64>>, Vec<f64>) = self
            .atoms
            .iter()
            .zip(mass)
            .filter(|(_, m)| *m > 0.0)
            .map(|(a, m)| (a.clone(), m))
            .unzip();
        DiscreteMeasure::new(self.atoms[0].len(), atoms, weights)
    }

    fn distance(&self, space: &PmmSpace, a: &[usize], b: &[usize]) -> Result<f64> {
        Ok(wasserstein_exact(
            1.0,
            &self.measure(0, a)?,
            &self.measure(1, b)?,
            fdd_metric(space),
        )?
        .0)
    }
}

enum Comparison {
    Binned(Binning),
    Exact(Tuples),
}

fn bin(samples: [&[Vec<f64>]; 2], axis_periods: &[Option<f64>], bins: usize) -> Result<Binning> {
    let axes = axis_periods.len();
    let mut shape = Vec::with_capacity(axes);
    let mut spacing = Vec::with_capacity(axes);
    let mut origin = Vec::with_capacity(axes);
    for (a, period) in axis_periods.iter().enumerate() {
        match period {
            Some(l) => {
                shape.push(bins);
                spacing.push(l / bins as f64);
                origin.push(0.0);
            }
            None => {
                let (lo, hi) = samples
                    .iter()
                    .flat_map(|s| s.iter().map(|x| x[a]))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                        (l.min(v), h.max(v))
                    });
                if hi > lo {
                    shape.push(bins);
                    spacing.push((hi - lo) / bins as f64);
                } else {
                    shape.push(1);
                    spacing.push(0.0);
                }
                origin.push(lo);
            }
        }
    }
    let nodes = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .unwrap_or(usize::MAX);
    if nodes > MAX_GRID_NODES {
        return Err(Error::Unsupported(format!(
            "binning grid with {nodes} nodes; use fewer bins or times"
        )));
    }
    let cell_of = |x: &[f64]| {
        let mut flat = 0;
        for a in 0..axes {
            let i = match axis_periods[a] {
                Some(l) => ((x[a].rem_euclid(l) / spacing[a]) as usize) % shape[a],
                None if shape[a] == 1 => 0,
                None => (((x[a] - origin[a]) / spacing[a]) as usize).min(shape[a] - 1),
            };
            flat = flat * shape[a] + i;
        }
        flat
    };
    let cells = [
        samples[0].iter().map(|x| cell_of(x)).collect(),
        samples[1].iter().map(|x| cell_of(x)).collect(),
    ];
    let periodic = axis_periods.iter().map(Option::is_some).collect();
    Ok(Binning {
        shape,
        spacing,
        periodic,
        cells,
    })
}

/// `W₁` between the fdd of `ensemble` pushed through `map` and the fdd of
/// `limit` at `times`, on a common binning of the product chart. Both
/// ensembles must share one time grid.
///
/// Atoms move to bin centres by at most half a bin per coordinate, so the
/// binned value is within `binning_slack` (one bin width per axis) of the
/// empirical one. Finite targets skip the binning and solve the transport
/// problem between the distinct sampled tuples.
pub fn pathlaw_w1(
    ensemble: &PathEnsemble,
    limit: &PathEnsemble,
    times: &[f64],
    map: &CollapseMap,
    settings: &PathLawSettings,
) -> Result<PathLawW1> {
    let same_grid = ensemble.times().len() == limit.times().len()
        && ensemble
            .times()
            .iter()
            .zip(limit.times())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
    if !same_grid {
        return Err(Error::GridMismatch);
    }
    if times.is_empty() || ensemble.is_empty() || limit.is_empty() {
        return Err(Error::InvalidArgument(
            "need times and nonempty ensembles".into(),
        ));
    }
    if settings.bins < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 bins, got {}",
            settings.bins
        )));
    }
    let d = map.target().chart_dim();
    if limit.dim() != d || ensemble.dim() != map.source().chart_dim() {
        return Err(Error::InvalidArgument(
            "ensemble charts do not match the collapse map".into(),
        ));
    }
    let indices: Vec<usize> = times
        .iter()
        .map(|&t| ensemble.time_index(t))
        .collect::<Result<_>>()?;
    let mapped: Vec<Vec<f64>> = (0..ensemble.len())
        .map(|p| {
            indices
                .iter()
                .flat_map(|&k| map.apply(ensemble.state(p, k)))
                .collect()
        })
        .collect();
    let reference: Vec<Vec<f64>> = (0..limit.len())
        .map(|p| {
            indices
                .iter()
                .flat_map(|&k| limit.state(p, k).iter().copied())
                .collect()
        })
        .collect();
    let target = map.target();
    let comparison = if target.finite_space().is_some() {
        Comparison::Exact(Tuples::new([&mapped, &reference]))
    } else {
        let axis_periods: Vec<Option<f64>> =
            (0..times.len()).flat_map(|_| periods(target)).collect();
        Comparison::Binned(bin([&mapped, &reference], &axis_periods, settings.bins)?)
    };
    let distance = |a: &[usize], b: &[usize]| match &comparison {
        Comparison::Binned(binning) => binning.distance(a, b),
        Comparison::Exact(tuples) => tuples.distance(target, a, b),
    };

    let all = |n: usize| (0..n).collect::<Vec<_>>();
    let (na, nb) = (mapped.len(), reference.len());
    let value = distance(&all(na), &all(nb))?;
    let replicates: Vec<f64> = (0..settings.bootstrap as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = path_stream(settings.seed, r);
            let a: Vec<usize> = (0..na).map(|_| rng.random_range(0..na)).collect();
            let b: Vec<usize> = (0..nb).map(|_| rng.random_range(0..nb)).collect();
            distance(&a, &b)
        })
        .collect::<Result<_>>()?;
    let standard_error = if replicates.len() > 1 {
        std_dev(&replicates)
    } else {
        0.0
    };
    Ok(PathLawW1 {
        times: times.to_vec(),
        value,
        standard_error,
        fiber_budget: times.len() as f64 * map.fiber_diameter_bound(),
        binning_slack: match &comparison {
            Comparison::Binned(binning) => binning.spacing.iter().sum(),
            Comparison::Exact(_) => 0.0,
        },
        bins: settings.bins,
        paths: [na, nb],
    })
}
