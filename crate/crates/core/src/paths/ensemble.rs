use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::spaces::{weighted_measure, PmmSpace, Potential, Quadrature, SpaceKind, WeightBranch};
use crate::transport::DiscreteMeasure;
use crate::{Error, Result};

/// Law of the starting point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum InitialLaw {
    /// Start at a fixed point (usually the base point `x̄`).
    Point(Vec<f64>),
    /// Start from the weighted probability measure `m̃` with constant `c`
    /// (ignored on spaces of finite mass).
    Weighted { c: f64 },
    /// Start from a supplied finitely supported law.
    Measure(DiscreteMeasure),
}

/// Resolution of the quadrature used to sample `m̃` when no closed form is
/// available.
const INITIAL_NODES: usize = 4096;

impl InitialLaw {
    pub(crate) fn sampler(&self, space: &PmmSpace) -> Result<InitialSampler> {
        match self {
            InitialLaw::Point(x) => {
                space.check_point(x)?;
                Ok(InitialSampler::Point(x.clone()))
            }
            InitialLaw::Measure(mu) => {
                if mu.dim() != space.chart_dim() {
                    return Err(Error::InvalidArgument(
                        "initial law has the wrong dimension".into(),
                    ));
                }
                for x in mu.atoms() {
                    space.check_point(x)?;
                }
                Ok(InitialSampler::Atoms(
                    mu.atoms().map(<[f64]>::to_vec).collect(),
                    cumulative(mu.weights()),
                ))
            }
            InitialLaw::Weighted { c } => weighted_sampler(space, *c),
        }
    }
}

pub(crate) enum InitialSampler {
    Point(Vec<f64>),
    Atoms(Vec<Vec<f64>>, Vec<f64>),
    /// Uniform law of the reference measure as drawn by `PmmSpace::sample_point`.
    Uniform(PmmSpace),
    /// Independent Gaussian coordinates `(mean, sd)`.
    Gaussian(Vec<(f64, f64)>),
    /// Node picked by mass, then jittered uniformly within its cell.
    Cells {
        nodes: Vec<f64>,
        cumulative: Vec<f64>,
        half_width: f64,
        lo: f64,
        hi: f64,
    },
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc / total
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn weighted_sampler(space: &PmmSpace, c: f64) -> Result<InitialSampler> {
    let weighted = weighted_measure(space, c)?;
    if let Some(p) = weighted.atom_probabilities() {
        let atoms = (0..p.len()).map(|i| vec![i as f64]).collect();
        return Ok(InitialSampler::Atoms(atoms, cumulative(&p)));
    }
    let uniform_reference = match space.kind() {
        SpaceKind::Circle { .. } | SpaceKind::Torus { .. } | SpaceKind::Interval { .. } => true,
        SpaceKind::ConvexDomainLogConcave {
            potential: Potential::Zero,
            domain,
            ..
        } => domain.is_bounded(),
        _ => false,
    };
    if uniform_reference && weighted.branch() == WeightBranch::Normalized {
        return Ok(InitialSampler::Uniform(space.clone()));
    }
    if let SpaceKind::EuclideanLogConcave { potential, .. } = space.kind() {
        if let Some(alpha) =
            potential
                .quadratic_stiffness()
                .or(matches!(potential, Potential::Zero).then_some(0.0))
        {
            // e^{-α|x|²/2 - C|x-b|²} is Gaussian with precision α + 2C
            let c_eff = match weighted.branch() {
                WeightBranch::Normalized => 0.0,
                WeightBranch::Gaussian { c } => c,
            };
            let precision = alpha + 2.0 * c_eff;
            let coords = space
                .base_point()
                .iter()
                .map(|b| (2.0 * c_eff * b / precision, precision.powf(-0.5)))
                .collect();
            return Ok(InitialSampler::Gaussian(coords));
        }
    }
    if space.chart_dim() == 1 {
        let rule = match weighted.branch() {
            WeightBranch::Gaussian { c } if !space.is_bounded() => {
                Quadrature::window(space, space.base_point(), (60.0 / c).sqrt(), INITIAL_NODES)?
                    .retain(|x| space.contains(x))
            }
            _ => Quadrature::for_space(space, INITIAL_NODES)?,
        };
        let nodes: Vec<f64> = (0..rule.len()).map(|i| rule.point(i)[0]).collect();
        let masses = weighted.on_quadrature(&rule);
        let half_width = if nodes.len() > 1 {
            0.5 * (nodes[1] - nodes[0]).abs()
        } else {
            0.0
        };
        let (lo, hi) = nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
                (l.min(x), h.max(x))
            });
        return Ok(InitialSampler::Cells {
            nodes,
            cumulative: cumulative(&masses),
            half_width,
            lo: lo - half_width,
            hi: hi + half_width,
        });
    }
    Err(Error::Unsupported(
        "sampling the weighted measure on this space".into(),
    ))
}

impl InitialSampler {
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let pick = |cum: &[f64], u: f64| cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        match self {
            InitialSampler::Point(x) => x.clone(),
            InitialSampler::Atoms(atoms, cum) => atoms[pick(cum, rng.random::<f64>())].clone(),
            InitialSampler::Uniform(space) => space.sample_point(rng),
            InitialSampler::Gaussian(coords) => coords
                .iter()
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            InitialSampler::Cells {
                nodes,
                cumulative,
                half_width,
                lo,
                hi,
            } => {
                let i = pick(cumulative, rng.random::<f64>());
                let jitter = (2.0 * rng.random::<f64>() - 1.0) * half_width;
                vec![(nodes[i] + jitter).clamp(*lo, *hi)]
            }
        }
    }
}

/// One stored trajectory: the states at every time of the ensemble's grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    /// Path index; together with the master seed it identifies the stream.
    pub id: u64,
    pub states: Vec<f64>,
}

/// A path dropped by the divergence guard.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceRecord {
    pub id: u64,
    pub t: f64,
    pub norm: f64,
}

/// Paths on a common time grid of one space.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    space: PmmSpace,
    times: Vec<f64>,
    dim: usize,
    paths: Vec<PathSample>,
    diverged: Vec<DivergenceRecord>,
    master_seed: u64,
    initial: InitialLaw,
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "time grid must be nonempty, finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

impl PathEnsemble {
    /// Assembles an ensemble from stored paths (each with `times.len()`
    /// states of dimension `space.chart_dim()`).
    pub fn from_paths(
        space: PmmSpace,
        times: Vec<f64>,
        paths: Vec<PathSample>,
        master_seed: u64,
        initial: InitialLaw,
    ) -> Result<Self> {
        check_grid(&times)?;
        let dim = space.chart_dim();
        if paths.iter().any(|p| p.states.len() != dim * times.len()) {
            return Err(Error::InvalidArgument(
                "path length does not match the time grid".into(),
            ));
        }
        Ok(PathEnsemble {
            space,
            times,
            dim,
            paths,
            diverged: Vec::new(),
            master_seed,
            initial,
        })
    }

    pub(crate) fn with_divergences(mut self, diverged: Vec<DivergenceRecord>) -> Self {
        self.diverged = diverged;
        self
    }

    pub fn space(&self) -> &PmmSpace {
        &self.space
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn paths(&self) -> &[PathSample] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn diverged(&self) -> &[DivergenceRecord] {
        &self.diverged
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn initial(&self) -> &InitialLaw {
        &self.initial
    }

    /// Index of `t` on the grid (matched to within `1e-9` relative).
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or(Error::MissingTime(t))
    }

    pub fn state(&self, path: usize, time_index: usize) -> &[f64] {
        &self.paths[path].states[time_index * self.dim..(time_index + 1) * self.dim]
    }

    /// States of every path at grid time `t`.
    pub fn marginal(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        let k = self.time_index(t)?;
        Ok((0..self.len()).map(|p| self.state(p, k).to_vec()).collect())
    }

    /// CSV with columns `path_id,t,coord_0..coord_{d-1}`, one row per path
    /// and time, in path then time order. Floats use the shortest exact
    /// representation, so equal ensembles give equal bytes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("coord_{k}")).collect();
        writeln!(out, "path_id,t,{}", header.join(","))?;
        for path in &self.paths {
            for (k, t) in self.times.iter().enumerate() {
                write!(out, "{},{}", path.id, t)?;
                for c in &path.states[k * self.dim..(k + 1) * self.dim] {
                    write!(out, ",{c}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}
