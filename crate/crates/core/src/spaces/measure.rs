use std::f64::consts::PI;

use super::domain::ConvexDomain;
use super::model::{MassMode, PmmSpace, SpaceKind};
use super::potential::Potential;
use crate::{Error, Result};

/// Quadrature rule for the reference measure `m`: node coordinates plus the
/// `m`-mass of each node's cell.
#[derive(Clone, Debug)]
pub struct Quadrature {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn from_parts(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(coords.len(), dim * weights.len());
        Quadrature {
            dim,
            coords,
            weights,
        }
    }

    /// Uniform rule with `resolution` nodes per axis: periodic nodes on
    /// circle factors, cell midpoints on intervals and boxes, atoms on finite
    /// spaces. Unbounded directions are truncated (see [`Self::window`]).
    pub fn for_space(space: &PmmSpace, resolution: usize) -> Result<Self> {
        let n = resolution.max(1);
        let scale = space.mass_scale();
        match space.kind() {
            SpaceKind::Circle { circumference } => {
                let h = circumference / n as f64;
                Ok(Self::from_parts(
                    1,
                    (0..n).map(|i| i as f64 * h).collect(),
                    vec![scale * h; n],
                ))
            }
            SpaceKind::Torus { first, second } => {
                let (h1, h2) = (first / n as f64, second / n as f64);
                let mut coords = Vec::with_capacity(2 * n * n);
                for i in 0..n {
                    for j in 0..n {
                        coords.push(i as f64 * h1);
                        coords.push(j as f64 * h2);
                    }
                }
                Ok(Self::from_parts(2, coords, vec![scale * h1 * h2; n * n]))
            }
            SpaceKind::Interval { a, b } => {
                let h = (b - a) / n as f64;
                Ok(Self::from_parts(
                    1,
                    (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
                    vec![scale * h; n],
                ))
            }
            SpaceKind::Finite(f) => Ok(Self::from_parts(
                1,
                (0..f.len()).map(|i| i as f64).collect(),
                f.weights().iter().map(|w| w * scale).collect(),
            )),
            SpaceKind::EuclideanLogConcave { dim, potential } => {
                let half = default_half_width(potential, space.base_point());
                let center = vec![0.0; *dim];
                Self::window(space, &center, half, n)
            }
            SpaceKind::ConvexDomainLogConcave {
                dim,
                potential,
                domain,
            } => {
                let (lo, hi): (Vec<f64>, Vec<f64>) = match domain {
                    ConvexDomain::Box { lower, upper } => {
                        let reach = default_half_width(potential, space.base_point());
                        lower
                            .iter()
                            .zip(upper)
                            .map(|(l, u)| {
                                let l2 = if l.is_finite() {
                                    *l
                                } else {
                                    u.min(0.0) - reach
                                };
                                let u2 = if u.is_finite() {
                                    *u
                                } else {
                                    l.max(0.0) + reach
                                };
                                (l2, u2)
                            })
                            .unzip()
                    }
                    ConvexDomain::Ball { center, radius } => (
                        center.iter().map(|c| c - radius).collect(),
                        center.iter().map(|c| c + radius).collect(),
                    ),
                };
                let rule = box_rule(*dim, &lo, &hi, n, |x| space.reference_density(x))?;
                Ok(rule.retain(|x| domain.contains(x)))
            }
        }
    }

    /// Midpoint rule on the cube `center ± half_width` (dimension ≤ 2).
    pub fn window(
        space: &PmmSpace,
        center: &[f64],
        half_width: f64,
        resolution: usize,
    ) -> Result<Self> {
        let lo: Vec<f64> = center.iter().map(|c| c - half_width).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + half_width).collect();
        box_rule(center.len(), &lo, &hi, resolution, |x| {
            space.reference_density(x)
        })
    }

    pub(crate) fn retain<F: Fn(&[f64]) -> bool>(self, keep: F) -> Self {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in 0..self.len() {
            if keep(self.point(i)) {
                coords.extend_from_slice(self.point(i));
                weights.push(self.weights[i]);
            }
        }
        Self::from_parts(self.dim, coords, weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        (0..self.len())
            .map(|i| self.weights[i] * f(self.point(i)))
            .sum()
    }

    pub fn values<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }
}

fn box_rule<D: Fn(&[f64]) -> f64>(
    dim: usize,
    lo: &[f64],
    hi: &[f64],
    n: usize,
    density: D,
) -> Result<Quadrature> {
    if dim > 2 {
        return Err(Error::Unsupported(format!(
            "grid quadrature in dimension {dim}"
        )));
    }
    let h: Vec<f64> = lo.iter().zip(hi).map(|(l, u)| (u - l) / n as f64).collect();
    let cell: f64 = h.iter().product();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let total = n.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![0.0; dim];
        for k in (0..dim).rev() {
            x[k] = lo[k] + ((rem % n) as f64 + 0.5) * h[k];
            rem /= n;
        }
        weights.push(cell * density(&x));
        coords.extend_from_slice(&x);
    }
    Ok(Quadrature::from_parts(dim, coords, weights))
}

fn default_half_width(potential: &Potential, base: &[f64]) -> f64 {
    let reach = base.iter().map(|b| b * b).sum::<f64>().sqrt();
    match potential {
        Potential::Quadratic { stiffness } => reach + 12.0 / stiffness.sqrt(),
        _ => reach + 12.0,
    }
}

/// Which branch of the weighted probability measure `m̃` is in force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightBranch {
    /// `m̃ = m / m(X)`.
    Normalized,
    /// `m̃ = z⁻¹ e^{-C d²(·, x̄)} m`.
    Gaussian { c: f64 },
}

/// The weighted probability measure `m̃` of a pointed space.
#[derive(Clone, Debug)]
pub struct WeightedMeasure {
    space: PmmSpace,
    branch: WeightBranch,
    normalizer: f64,
}

/// Builds `m̃`: `m/m(X)` on bounded spaces (and whenever `m` is already
/// normalized), `z⁻¹ e^{-C d²(·,x̄)} m` on unbounded sigma-finite spaces.
/// `C` is ignored on the first branch.
pub fn weighted_measure(space: &PmmSpace, c: f64) -> Result<WeightedMeasure> {
    if space.is_bounded() || space.mass_mode() == MassMode::Normalized {
        let total = space.total_mass();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NonIntegrable(c));
        }
        return Ok(WeightedMeasure {
            space: space.clone(),
            branch: WeightBranch::Normalized,
            normalizer: total,
        });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {c}"
        )));
    }
    let z = match space.kind() {
        SpaceKind::EuclideanLogConcave { dim, potential }
            if potential.quadratic_stiffness().is_some() =>
        {
            // ∫ exp(-a|x|² - C|x - b|²) dx with a = stiffness/2, completed square.
            let a = 0.5 * potential.quadratic_stiffness().unwrap_or(0.0);
            let b2: f64 = space.base_point().iter().map(|v| v * v).sum();
            space.mass_scale()
                * (PI / (a + c)).powf(*dim as f64 / 2.0)
                * (-a * c * b2 / (a + c)).exp()
        }
        _ => gaussian_normalizer_by_quadrature(space, c)?,
    };
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::NonIntegrable(c));
    }
    Ok(WeightedMeasure {
        space: space.clone(),
        branch: WeightBranch::Gaussian { c },
        normalizer: z,
    })
}

fn gaussian_normalizer_by_quadrature(space: &PmmSpace, c: f64) -> Result<f64> {
    let base = space.base_point().to_vec();
    let dim = base.len();
    if dim > 2 {
        return Err(Error::Unsupported(format!(
            "weighted measure quadrature in dimension {dim}"
        )));
    }
    let weight = |x: &[f64]| {
        let d = space.distance(x, &base);
        (-c * d * d).exp()
    };
    let step = if dim == 1 { 0.005 } else { 0.04 };
    let r0 = (40.0 / c).sqrt();
    let mut previous = f64::NAN;
    for k in 0..4 {
        let half = r0 * f64::from(1u32 << k);
        let n = ((2.0 * half / step).ceil() as usize).max(16);
        let rule = Quadrature::window(space, &base, half, n)?.retain(|x| space.contains(x));
        let z = rule.integrate(weight);
        if !z.is_finite() {
            return Err(Error::NonIntegrable(c));
        }
        if k > 0 && (z - previous).abs() <= 1e-9 * z.abs() {
            return Ok(z);
        }
        previous = z;
    }
    Err(Error::NonIntegrable(c))
}

impl WeightedMeasure {
    pub fn space(&self) -> &PmmSpace {
        &self.space
    }

    pub fn branch(&self) -> WeightBranch {
        self.branch
    }

    /// `m(X)` on the normalized branch, `z` on the Gaussian branch.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Radon–Nikodym derivative `dm̃/dm` at `x`.
    pub fn relative_density(&self, x: &[f64]) -> f64 {
        match self.branch {
            WeightBranch::Normalized => 1.0 / self.normalizer,
            WeightBranch::Gaussian { c } => {
                let d = self.space.distance(x, self.space.base_point());
                (-c * d * d).exp() / self.normalizer
            }
        }
    }

    /// Node masses of `m̃` on a quadrature rule for `m` (not renormalized).
    pub fn on_quadrature(&self, rule: &Quadrature) -> Vec<f64> {
        (0..rule.len())
            .map(|i| rule.weights()[i] * self.relative_density(rule.point(i)))
            .collect()
    }

    /// Atom probabilities on a finite space.
    pub fn atom_probabilities(&self) -> Option<Vec<f64>> {
        let f = self.space.finite_space()?;
        let scale = self.space.mass_scale();
        Some(
            (0..f.len())
                .map(|i| f.weights()[i] * scale * self.relative_density(&[i as f64]))
                .collect(),
        )
    }

    /// Total mass of `m̃` under the default quadrature (1 up to quadrature error).
    pub fn total_mass(&self, resolution: usize) -> Result<f64> {
        let rule = match (self.branch, self.space.is_bounded()) {
            (WeightBranch::Gaussian { c }, false) => {
                let half = (60.0 / c).sqrt();
                let n = if self.space.chart_dim() == 1 {
                    resolution.max(4000)
                } else {
                    resolution.max(400)
                };
                Quadrature::window(&self.space, self.space.base_point(), half, n)?
                    .retain(|x| self.space.contains(x))
            }
            _ => Quadrature::for_space(&self.space, resolution)?,
        };
        Ok(self.on_quadrature(&rule).iter().sum())
    }
}
