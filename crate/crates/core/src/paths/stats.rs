use rayon::prelude::*;
use serde::Serialize;

use super::ensemble::PathEnsemble;
use crate::numeric::{linear_fit, mean, std_dev};
use crate::spaces::{CollapseMap, PmmSpace};
use crate::transport::DiscreteMeasure;
use crate::{Error, Result};

/// Empirical joint law of `(B_{t₁}, …, B_{t_k})`, optionally pushed through
/// `map`. Atoms are the concatenated states; use [`fdd_metric`] for the sum
/// metric on the product.
pub fn extract_fdd(
    ensemble: &PathEnsemble,
    times: &[f64],
    map: Option<&CollapseMap>,
) -> Result<DiscreteMeasure> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("need at least one time".into()));
    }
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("ensemble has no paths".into()));
    }
    let indices: Vec<usize> = times
        .iter()
        .map(|&t| ensemble.time_index(t))
        .collect::<Result<_>>()?;
    let dim = match map {
        Some(m) => m.target().chart_dim(),
        None => ensemble.dim(),
    };
    let atoms: Vec<Vec<f64>> = (0..ensemble.len())
        .map(|p| {
            let mut atom = Vec::with_capacity(dim * indices.len());
            for &k in &indices {
                let x = ensemble.state(p, k);
                match map {
                    Some(m) => atom.extend(m.apply(x)),
                    None => atom.extend_from_slice(x),
                }
            }
            atom
        })
        .collect();
    DiscreteMeasure::uniform(dim * indices.len(), atoms)
}

/// Sum metric `Σᵢ d(xᵢ, yᵢ)` on the `k`-fold product of `space`.
pub fn fdd_metric(space: &PmmSpace) -> impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + '_ {
    let d = space.chart_dim();
    move |x: &[f64], y: &[f64]| {
        x.chunks(d)
            .zip(y.chunks(d))
            .map(|(a, b)| space.distance(a, b))
            .sum()
    }
}

/// Monte Carlo estimate of `P(sup_{|t−s|≤η, s,t≤T} d(B_s, B_t) > δ)` with the
/// supremum taken over grid times.
#[derive(Clone, Debug, Serialize)]
pub struct ModulusEstimate {
    pub eta: f64,
    pub delta: f64,
    pub value: f64,
    pub standard_error: f64,
    /// Largest grid step on `[0, T]`; the grid supremum is a lower bound for
    /// the path supremum.
    pub grid_step: f64,
    pub paths: usize,
}

pub fn modulus_statistic(
    ensemble: &PathEnsemble,
    t_max: f64,
    eta: f64,
    delta: f64,
) -> Result<ModulusEstimate> {
    if !(eta > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument("need eta > 0 and delta >= 0".into()));
    }
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("ensemble has no paths".into()));
    }
    let times: Vec<f64> = ensemble
        .times()
        .iter()
        .copied()
        .filter(|&t| t <= t_max + 1e-12)
        .collect();
    let grid_step = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if times.last().is_none_or(|&t| t < t_max - 1e-9) || grid_step > eta / 4.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "grid must cover [0, {t_max}] with steps at most eta/4 = {}",
            eta / 4.0
        )));
    }
    let space = ensemble.space();
    let exceed: Vec<bool> = (0..ensemble.len())
        .into_par_iter()
        .map(|p| {
            for i in 0..times.len() {
                for j in i + 1..times.len() {
                    if times[j] - times[i] > eta + 1e-12 {
                        break;
                    }
                    if space.distance(ensemble.state(p, i), ensemble.state(p, j)) > delta {
                        return true;
                    }
                }
            }
            false
        })
        .collect();
    let n = exceed.len() as f64;
    let value = exceed.iter().filter(|&&e| e).count() as f64 / n;
    Ok(ModulusEstimate {
        eta,
        delta,
        value,
        standard_error: (value * (1.0 - value) / n).sqrt(),
        grid_step,
        paths: exceed.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KolmogorovRow {
    pub t: f64,
    pub h: f64,
    pub moment: f64,
    pub standard_error: f64,
}

/// Moments `E[d̃^β(B_t, B_{t+h})]` with `d̃ = d ∧ 1`, and the fit
/// `moment ≈ C h^θ` of the per-`h` averages over `t` (log-log least squares
/// over `h > 0`).
#[derive(Clone, Debug, Serialize)]
pub struct KolmogorovTable {
    pub beta: f64,
    pub rows: Vec<KolmogorovRow>,
    /// `(h, mean moment over t, standard error)`.
    pub by_h: Vec<(f64, f64, f64)>,
    pub theta: f64,
    pub c: f64,
}

pub fn kolmogorov_moment(
    ensemble: &PathEnsemble,
    beta: f64,
    t_grid: &[f64],
    h_grid: &[f64],
) -> Result<KolmogorovTable> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if t_grid.is_empty() || h_grid.is_empty() || h_grid.iter().any(|h| !(*h >= 0.0)) {
        return Err(Error::InvalidArgument(
            "need nonempty t grid and nonnegative h grid".into(),
        ));
    }
    let space = ensemble.space();
    let mut rows = Vec::new();
    let mut by_h = Vec::new();
    for &h in h_grid {
        let mut values_all = Vec::new();
        for &t in t_grid {
            let i = ensemble.time_index(t)?;
            let j = ensemble.time_index(t + h)?;
            let values: Vec<f64> = (0..ensemble.len())
                .map(|p| {
                    space
                        .distance(ensemble.state(p, i), ensemble.state(p, j))
                        .min(1.0)
                        .powf(beta)
                })
                .collect();
            let se = if values.len() > 1 {
                std_dev(&values) / (values.len() as f64).sqrt()
            } else {
                0.0
            };
            rows.push(KolmogorovRow {
                t,
                h,
                moment: mean(&values),
                standard_error: se,
            });
            values_all.extend(values);
        }
        let se = if values_all.len() > 1 {
            std_dev(&values_all) / (values_all.len() as f64).sqrt()
        } else {
            0.0
        };
        by_h.push((h, mean(&values_all), se));
    }
    let fit: Vec<(f64, f64)> = by_h
        .iter()
        .filter(|(h, m, _)| *h > 0.0 && *m > 0.0)
        .map(|(h, m, _)| (h.ln(), m.ln()))
        .collect();
    let (theta, c) = if fit.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        let (slope, intercept) = linear_fit(&xs, &ys);
        (slope, intercept.exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(KolmogorovTable {
        beta,
        rows,
        by_h,
        theta,
        c,
    })
}
