use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{check_grid, DivergenceRecord, InitialLaw, PathEnsemble, PathSample};
use crate::heat::SpectralKernel;
use crate::rng::path_stream;
use crate::spaces::{ConvexDomain, PmmSpace, Potential};
use crate::{Error, Result};

/// Euler–Maruyama paths whose norm exceeds this are abandoned.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Markov chain with transitions `p(Δt, x, ·)` on the grid `times`, each
/// step drawn exactly from the kernel (analytic laws on model spaces,
/// inverse CDF on the rows of `e^{tL}` for finite and cell spaces).
///
/// The chain starts at time 0 from `initial`; if `times[0] > 0` the first
/// stored state is already one transition away.
pub fn sample_kernel_chain(
    kernel: &SpectralKernel,
    initial: &InitialLaw,
    times: &[f64],
    count: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    check_grid(times)?;
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let space = kernel.space();
    let start = initial.sampler(space)?;
    let dim = space.chart_dim();
    let paths: Vec<PathSample> = (0..count as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_stream(seed, id);
            let mut x = start.draw(&mut rng);
            let mut states = Vec::with_capacity(dim * times.len());
            let mut previous = 0.0;
            for &t in times {
                if t > previous {
                    x = kernel.sample_step(t - previous, &x, &mut rng)?;
                }
                previous = t;
                states.extend_from_slice(&x);
            }
            Ok(PathSample { id, states })
        })
        .collect::<Result<_>>()?;
    PathEnsemble::from_paths(space.clone(), times.to_vec(), paths, seed, initial.clone())
}

/// Step size, horizon and recording stride of an SDE discretization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// States are stored every `record_every` steps.
    pub record_every: usize,
    /// Multiplier of the Brownian increment; 0 turns the scheme into the
    /// explicit Euler gradient flow.
    pub noise: f64,
}

impl SdeConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SdeConfig {
            dt,
            t_end,
            record_every: 1,
            noise: 1.0,
        }
    }

    pub fn record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = 0.0;
        self
    }

    /// Number of steps; `t_end` must be a multiple of `dt` and of the
    /// recording interval.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is shorter than dt",
                self.t_end
            )));
        }
        if self.record_every == 0 || !self.noise.is_finite() {
            return Err(Error::InvalidArgument(
                "record_every must be positive and noise finite".into(),
            ));
        }
        let steps = (self.t_end / self.dt).round() as usize;
        if ((steps as f64) * self.dt - self.t_end).abs() > 1e-9 * self.t_end
            || !steps.is_multiple_of(self.record_every)
        {
            return Err(Error::InvalidArgument(
                "horizon must be a whole number of recording intervals".into(),
            ));
        }
        Ok(steps)
    }

    /// Recorded times `0, s·dt, 2s·dt, …, t_end` for stride `s`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let steps = self.steps()?;
        Ok((0..=steps / self.record_every)
            .map(|k| (k * self.record_every) as f64 * self.dt)
            .collect())
    }
}

/// How a step that leaves the domain is brought back.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Mirror the step across the boundary (for intervals this is exact
    /// for Brownian motion).
    #[default]
    Reflect,
    /// Euclidean projection onto the closed domain.
    Project,
}

enum Constraint<'a> {
    Free,
    Domain(&'a ConvexDomain, Boundary),
}

fn simulate(
    space: PmmSpace,
    potential: &Potential,
    x0: &[f64],
    config: &SdeConfig,
    constraint: Constraint<'_>,
    count: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let steps = config.steps()?;
    let times = config.grid()?;
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let dim = x0.len();
    let sd = config.noise * (2.0 * config.dt).sqrt();
    let results: Vec<std::result::Result<PathSample, DivergenceRecord>> = (0..count as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_stream(seed, id);
            let mut x = x0.to_vec();
            let mut states = Vec::with_capacity(dim * times.len());
            states.extend_from_slice(&x);
            for step in 1..=steps {
                let grad = potential.gradient(&x);
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi += -gi * config.dt + sd * rng.sample::<f64, _>(StandardNormal);
                }
                if let Constraint::Domain(domain, boundary) = &constraint {
                    let moved = match boundary {
                        Boundary::Reflect => domain.reflect(&x),
                        Boundary::Project => domain.project(&x),
                    };
                    match moved {
                        Ok(y) if domain.contains(&y) => x = y,
                        _ => {
                            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                            return Err(DivergenceRecord {
                                id,
                                t: step as f64 * config.dt,
                                norm,
                            });
                        }
                    }
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm <= DIVERGENCE_BOUND) {
                    return Err(DivergenceRecord {
                        id,
                        t: step as f64 * config.dt,
                        norm,
                    });
                }
                if step % config.record_every == 0 {
                    states.extend_from_slice(&x);
                }
            }
            Ok(PathSample { id, states })
        })
        .collect();
    let mut paths = Vec::with_capacity(count);
    let mut diverged = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(d) => diverged.push(d),
        }
    }
    Ok(
        PathEnsemble::from_paths(space, times, paths, seed, InitialLaw::Point(x0.to_vec()))?
            .with_divergences(diverged),
    )
}

/// `X_{k+1} = X_k − ∇V(X_k) dt + √(2dt) ξ_k` on `ℝ^d` started at `x0`.
///
/// Paths whose norm exceeds [`DIVERGENCE_BOUND`] are dropped from the
/// ensemble and listed in [`PathEnsemble::diverged`].
pub fn euler_maruyama(
    potential: &Potential,
    x0: &[f64],
    config: &SdeConfig,
    count: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "starting point must be finite".into(),
        ));
    }
    let space = PmmSpace::euclidean(x0.len(), potential.clone())?;
    simulate(space, potential, x0, config, Constraint::Free, count, seed)
}

/// Euler–Maruyama in a closed convex domain: each step is followed by
/// `boundary` (mirror reflection or projection). A step that cannot be
/// brought back into the domain drops the path with a divergence record.
pub fn reflected_em(
    domain: &ConvexDomain,
    potential: &Potential,
    x0: &[f64],
    config: &SdeConfig,
    boundary: Boundary,
    count: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    domain.validate()?;
    if !domain.contains(x0) {
        return Err(Error::OutsideSpace(x0.to_vec()));
    }
    let space = PmmSpace::convex_domain(potential.clone(), domain.clone(), x0.to_vec())?;
    simulate(
        space,
        potential,
        x0,
        config,
        Constraint::Domain(domain, boundary),
        count,
        seed,
    )
}
