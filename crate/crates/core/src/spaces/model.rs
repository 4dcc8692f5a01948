use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::domain::ConvexDomain;
use super::finite::{euclid, FiniteMms};
use super::potential::Potential;
use crate::{Error, Result};

/// How the reference measure is normalized and which branch of the weighted
/// measure `m̃` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MassMode {
    /// `m` is rescaled to a probability measure (requires finite total mass); `m̃ = m`.
    Normalized,
    /// `m` is the raw Hausdorff / `e^{-V}dx` / atom-weight measure. On bounded
    /// spaces `m̃ = m/m(X)`; on unbounded ones `m̃ ∝ e^{-C d²(·,x̄)} m`.
    SigmaFinite,
}

#[derive(Clone, Debug)]
pub enum SpaceKind {
    /// Circle of the given circumference, chart `θ ∈ [0, L)`.
    Circle {
        circumference: f64,
    },
    /// Flat torus `S¹(ℓ₁) × S¹(ℓ₂)` with the product Riemannian metric.
    Torus {
        first: f64,
        second: f64,
    },
    Interval {
        a: f64,
        b: f64,
    },
    EuclideanLogConcave {
        dim: usize,
        potential: Potential,
    },
    ConvexDomainLogConcave {
        dim: usize,
        potential: Potential,
        domain: ConvexDomain,
    },
    /// Atoms are addressed by the one-coordinate chart `[index]`.
    Finite(Arc<FiniteMms>),
}

/// Pointed metric measure space.
#[derive(Clone, Debug)]
pub struct PmmSpace {
    kind: SpaceKind,
    base_point: Vec<f64>,
    mass_mode: MassMode,
    mass_scale: f64,
}

impl PmmSpace {
    pub fn new(kind: SpaceKind, base_point: Vec<f64>, mass_mode: MassMode) -> Result<Self> {
        validate_kind(&kind)?;
        let mut space = PmmSpace {
            kind,
            base_point,
            mass_mode,
            mass_scale: 1.0,
        };
        if !space.contains(&space.base_point) {
            return Err(Error::OutsideSpace(space.base_point.clone()));
        }
        if mass_mode == MassMode::Normalized {
            let total = space.hausdorff_mass();
            if !(total.is_finite() && total > 0.0) {
                return Err(Error::InvalidArgument(
                    "normalized mass mode needs finite positive total mass".into(),
                ));
            }
            space.mass_scale = 1.0 / total;
        }
        Ok(space)
    }

    pub fn circle(circumference: f64) -> Result<Self> {
        Self::new(
            SpaceKind::Circle { circumference },
            vec![0.0],
            MassMode::SigmaFinite,
        )
    }

    pub fn torus(first: f64, second: f64) -> Result<Self> {
        Self::new(
            SpaceKind::Torus { first, second },
            vec![0.0, 0.0],
            MassMode::SigmaFinite,
        )
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(SpaceKind::Interval { a, b }, vec![a], MassMode::SigmaFinite)
    }

    pub fn euclidean(dim: usize, potential: Potential) -> Result<Self> {
        Self::new(
            SpaceKind::EuclideanLogConcave { dim, potential },
            vec![0.0; dim],
            MassMode::SigmaFinite,
        )
    }

    pub fn convex_domain(
        potential: Potential,
        domain: ConvexDomain,
        base_point: Vec<f64>,
    ) -> Result<Self> {
        let dim = domain.dim();
        Self::new(
            SpaceKind::ConvexDomainLogConcave {
                dim,
                potential,
                domain,
            },
            base_point,
            MassMode::SigmaFinite,
        )
    }

    pub fn finite(space: FiniteMms) -> Result<Self> {
        let base = vec![space.base_index() as f64];
        Self::new(
            SpaceKind::Finite(Arc::new(space)),
            base,
            MassMode::SigmaFinite,
        )
    }

    pub fn with_base_point(self, base_point: Vec<f64>) -> Result<Self> {
        Self::new(self.kind, base_point, self.mass_mode)
    }

    pub fn with_mass_mode(self, mass_mode: MassMode) -> Result<Self> {
        Self::new(self.kind, self.base_point, mass_mode)
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn mass_mode(&self) -> MassMode {
        self.mass_mode
    }

    /// Factor applied to the raw measure (`1/m_raw(X)` when normalized).
    pub fn mass_scale(&self) -> f64 {
        self.mass_scale
    }

    pub fn finite_space(&self) -> Option<&FiniteMms> {
        match &self.kind {
            SpaceKind::Finite(f) => Some(f),
            _ => None,
        }
    }

    pub fn potential(&self) -> Option<&Potential> {
        match &self.kind {
            SpaceKind::EuclideanLogConcave { potential, .. }
            | SpaceKind::ConvexDomainLogConcave { potential, .. } => Some(potential),
            _ => None,
        }
    }

    /// Number of chart coordinates of a point.
    pub fn chart_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Circle { .. } | SpaceKind::Interval { .. } | SpaceKind::Finite(_) => 1,
            SpaceKind::Torus { .. } => 2,
            SpaceKind::EuclideanLogConcave { dim, .. }
            | SpaceKind::ConvexDomainLogConcave { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.chart_dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            SpaceKind::Circle { .. }
            | SpaceKind::Torus { .. }
            | SpaceKind::EuclideanLogConcave { .. } => true,
            SpaceKind::Interval { a, b } => x[0] >= a - 1e-12 && x[0] <= b + 1e-12,
            SpaceKind::ConvexDomainLogConcave { domain, .. } => domain.contains(x),
            SpaceKind::Finite(f) => x[0] >= 0.0 && x[0].fract() == 0.0 && (x[0] as usize) < f.len(),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideSpace(x.to_vec()))
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            SpaceKind::Circle { circumference } => circle_dist(x[0], y[0], *circumference),
            SpaceKind::Torus { first, second } => {
                circle_dist(x[0], y[0], *first).hypot(circle_dist(x[1], y[1], *second))
            }
            SpaceKind::Finite(f) => f.dist(x[0] as usize, y[0] as usize),
            _ => euclid(x, y),
        }
    }

    /// Canonical chart representative (angles reduced to `[0, L)`).
    pub fn canonical(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            SpaceKind::Circle { circumference } => vec![x[0].rem_euclid(*circumference)],
            SpaceKind::Torus { first, second } => {
                vec![x[0].rem_euclid(*first), x[1].rem_euclid(*second)]
            }
            _ => x.to_vec(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match &self.kind {
            SpaceKind::EuclideanLogConcave { .. } => false,
            SpaceKind::ConvexDomainLogConcave { domain, .. } => domain.is_bounded(),
            _ => true,
        }
    }

    /// Density of the reference measure `m` with respect to the chart's
    /// Lebesgue (Hausdorff) measure, including the normalization factor.
    /// For finite spaces this is the atom mass.
    pub fn reference_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SpaceKind::EuclideanLogConcave { potential, .. }
            | SpaceKind::ConvexDomainLogConcave { potential, .. } => {
                self.mass_scale * (-potential.value(x)).exp()
            }
            SpaceKind::Finite(f) => self.mass_scale * f.weights()[x[0] as usize],
            _ => self.mass_scale,
        }
    }

    /// Total mass of the reference measure (infinite when it is not finite).
    pub fn total_mass(&self) -> f64 {
        self.mass_scale * self.hausdorff_mass()
    }

    fn hausdorff_mass(&self) -> f64 {
        match &self.kind {
            SpaceKind::Circle { circumference } => *circumference,
            SpaceKind::Torus { first, second } => first * second,
            SpaceKind::Interval { a, b } => b - a,
            SpaceKind::Finite(f) => f.total_weight(),
            SpaceKind::EuclideanLogConcave { dim, potential } => match potential {
                Potential::Zero => f64::INFINITY,
                Potential::Quadratic { stiffness } => {
                    (2.0 * PI / stiffness).powf(*dim as f64 / 2.0)
                }
                Potential::Custom { .. } => {
                    if *dim == 1 {
                        let v = |x: f64| (-potential.value(&[x])).exp();
                        let m = crate::numeric::integrate(v, -60.0, 60.0, 1200, 8);
                        let tail = v(60.0) + v(-60.0);
                        if tail > 1e-14 * m {
                            f64::INFINITY
                        } else {
                            m
                        }
                    } else {
                        f64::INFINITY
                    }
                }
            },
            SpaceKind::ConvexDomainLogConcave {
                potential, domain, ..
            } => match (domain, potential) {
                (ConvexDomain::Box { lower, upper }, Potential::Zero) => {
                    lower.iter().zip(upper).map(|(l, u)| u - l).product()
                }
                (ConvexDomain::Box { lower, upper }, _) if lower.len() == 1 => {
                    let lo = if lower[0].is_finite() {
                        lower[0]
                    } else {
                        -60.0
                    };
                    let hi = if upper[0].is_finite() { upper[0] } else { 60.0 };
                    crate::numeric::integrate(|x| (-potential.value(&[x])).exp(), lo, hi, 1200, 8)
                }
                (ConvexDomain::Ball { center, radius }, Potential::Zero) => {
                    let d = center.len() as f64;
                    PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0 + 1.0)
                        * radius.powf(d)
                }
                _ => f64::INFINITY,
            },
        }
    }

    /// Draws a point: uniform on compact model spaces and domains (by
    /// rejection from the bounding box), a random atom on finite spaces, and
    /// a standard Gaussian around the base point otherwise.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SpaceKind::Circle { circumference } => vec![rng.random::<f64>() * circumference],
            SpaceKind::Torus { first, second } => {
                vec![rng.random::<f64>() * first, rng.random::<f64>() * second]
            }
            SpaceKind::Interval { a, b } => vec![a + rng.random::<f64>() * (b - a)],
            SpaceKind::Finite(f) => vec![rng.random_range(0..f.len()) as f64],
            SpaceKind::EuclideanLogConcave { .. } => self
                .base_point
                .iter()
                .map(|b| b + rng.sample::<f64, _>(StandardNormal))
                .collect(),
            SpaceKind::ConvexDomainLogConcave { domain, .. } => loop {
                let x: Vec<f64> = match domain {
                    ConvexDomain::Box { lower, upper } => lower
                        .iter()
                        .zip(upper)
                        .map(|(l, u)| {
                            if l.is_finite() && u.is_finite() {
                                l + rng.random::<f64>() * (u - l)
                            } else {
                                let start = if l.is_finite() { *l } else { *u };
                                let sign = if l.is_finite() { 1.0 } else { -1.0 };
                                start + sign * rng.sample::<f64, _>(StandardNormal).abs()
                            }
                        })
                        .collect(),
                    ConvexDomain::Ball { center, radius } => center
                        .iter()
                        .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                        .collect(),
                };
                if domain.contains(&x) {
                    break x;
                }
            },
        }
    }
}

pub(crate) fn circle_dist(x: f64, y: f64, circumference: f64) -> f64 {
    let d = (x - y).rem_euclid(circumference);
    d.min(circumference - d)
}

fn validate_kind(kind: &SpaceKind) -> Result<()> {
    let positive = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} must be positive, got {v}"
            )))
        }
    };
    match kind {
        SpaceKind::Circle { circumference } => positive(*circumference, "circumference"),
        SpaceKind::Torus { first, second } => {
            positive(*first, "first circumference")?;
            positive(*second, "second circumference")
        }
        SpaceKind::Interval { a, b } => {
            if a < b && a.is_finite() && b.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "interval needs a < b, got [{a}, {b}]"
                )))
            }
        }
        SpaceKind::EuclideanLogConcave { dim, potential } => {
            if *dim == 0 {
                return Err(Error::InvalidArgument("dimension must be positive".into()));
            }
            if let Potential::Quadratic { stiffness } = potential {
                positive(*stiffness, "stiffness")?;
            }
            Ok(())
        }
        SpaceKind::ConvexDomainLogConcave { dim, domain, .. } => {
            domain.validate()?;
            if domain.dim() != *dim {
                return Err(Error::InvalidArgument("domain dimension mismatch".into()));
            }
            Ok(())
        }
        SpaceKind::Finite(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_point_must_lie_in_the_space() {
        assert!(PmmSpace::interval(0.0, 1.0)
            .unwrap()
            .with_base_point(vec![2.0])
            .is_err());
        let f = FiniteMms::two_state(1.0, 1.0).unwrap();
        assert!(PmmSpace::finite(f)
            .unwrap()
            .with_base_point(vec![5.0])
            .is_err());
    }

    #[test]
    fn torus_distance_is_product_metric() {
        let t = PmmSpace::torus(2.0 * PI, 2.0 * PI / 4.0).unwrap();
        let d = t.distance(&[0.1, 0.0], &[2.0 * PI - 0.1, 2.0 * PI / 4.0 - 0.2]);
        assert!((d - (0.2f64).hypot(0.2)).abs() < 1e-12);
    }

    #[test]
    fn normalized_mode_rescales_mass() {
        let t = PmmSpace::torus(2.0 * PI, 1.0)
            .unwrap()
            .with_mass_mode(MassMode::Normalized)
            .unwrap();
        assert!((t.total_mass() - 1.0).abs() < 1e-15);
        assert!(PmmSpace::euclidean(1, Potential::Zero)
            .unwrap()
            .with_mass_mode(MassMode::Normalized)
            .is_err());
        let g = PmmSpace::euclidean(2, Potential::quadratic(1.0)).unwrap();
        assert!((g.total_mass() - 2.0 * PI).abs() < 1e-12);
    }
}
