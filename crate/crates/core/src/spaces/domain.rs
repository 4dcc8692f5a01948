use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MEMBERSHIP_TOL: f64 = 1e-12;

/// Closed convex domain in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConvexDomain {
    /// Product of intervals; bounds may be infinite (`[0, ∞)` is a half-line).
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl ConvexDomain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        ConvexDomain::Box {
            lower: vec![lo],
            upper: vec![hi],
        }
    }

    pub fn half_line(lo: f64) -> Self {
        ConvexDomain::Box {
            lower: vec![lo],
            upper: vec![f64::INFINITY],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexDomain::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::InvalidArgument(
                        "box bounds must have equal, positive length".into(),
                    ));
                }
                if lower
                    .iter()
                    .zip(upper)
                    .any(|(l, u)| !(l < u) || l.is_nan() || u.is_nan())
                {
                    return Err(Error::InvalidArgument(
                        "box needs lower < upper in every coordinate".into(),
                    ));
                }
            }
            ConvexDomain::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidArgument(
                        "ball needs a centre and a positive radius".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexDomain::Box { lower, .. } => lower.len(),
            ConvexDomain::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ConvexDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - MEMBERSHIP_TOL && *v <= u + MEMBERSHIP_TOL),
            ConvexDomain::Ball { center, radius } => dist(x, center) <= radius + MEMBERSHIP_TOL,
        }
    }

    /// Euclidean projection onto the closed domain.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Projection(x.to_vec()));
        }
        let p = match self {
            ConvexDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            ConvexDomain::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    x.to_vec()
                } else {
                    x.iter()
                        .zip(center)
                        .map(|(v, c)| c + (v - c) * radius / r)
                        .collect()
                }
            }
        };
        Ok(p)
    }

    /// Mirror reflection across the boundary. Boxes fold each coordinate back
    /// into its interval; balls reflect through the tangent plane at the
    /// projection and fall back to projection if that still leaves the ball.
    pub fn reflect(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Projection(x.to_vec()));
        }
        match self {
            ConvexDomain::Box { lower, upper } => Ok(x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| fold(*v, *l, *u))
                .collect()),
            ConvexDomain::Ball { .. } => {
                if self.contains(x) {
                    return Ok(x.to_vec());
                }
                let p = self.project(x)?;
                let mirrored: Vec<f64> = p.iter().zip(x).map(|(pi, xi)| 2.0 * pi - xi).collect();
                if self.contains(&mirrored) {
                    Ok(mirrored)
                } else {
                    self.project(&mirrored)
                }
            }
        }
    }

    /// Radius of a ball around the origin containing the domain (infinite when unbounded).
    pub fn bounding_radius(&self) -> f64 {
        match self {
            ConvexDomain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            ConvexDomain::Ball { center, radius } => {
                center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounding_radius().is_finite()
    }
}

fn fold(v: f64, lo: f64, hi: f64) -> f64 {
    if v >= lo && v <= hi {
        return v;
    }
    if hi.is_infinite() {
        return if v < lo { 2.0 * lo - v } else { v };
    }
    if lo.is_infinite() {
        return if v > hi { 2.0 * hi - v } else { v };
    }
    let width = hi - lo;
    let r = (v - lo).rem_euclid(2.0 * width);
    if r <= width {
        lo + r
    } else {
        lo + 2.0 * width - r
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_line_reflection_is_absolute_value() {
        let d = ConvexDomain::half_line(0.0);
        assert_eq!(d.reflect(&[-0.3]).unwrap(), vec![0.3]);
        assert_eq!(d.project(&[-0.3]).unwrap(), vec![0.0]);
        assert!(!d.contains(&[-0.1]));
        assert!(d.bounding_radius().is_infinite());
    }

    #[test]
    fn folding_handles_multiple_crossings() {
        let d = ConvexDomain::interval(0.0, 1.0);
        assert!((d.reflect(&[2.3]).unwrap()[0] - 0.3).abs() < 1e-12);
        assert!((d.reflect(&[-1.2]).unwrap()[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_is_a_projection_failure() {
        let d = ConvexDomain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert!(matches!(
            d.project(&[f64::NAN, 0.0]),
            Err(Error::Projection(_))
        ));
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(x in -5.0..5.0f64, y in -5.0..5.0f64) {
            for d in [
                ConvexDomain::Ball { center: vec![0.5, -0.2], radius: 1.3 },
                ConvexDomain::Box { lower: vec![0.0, -1.0], upper: vec![1.0, 2.0] },
            ] {
                let p = d.project(&[x, y]).unwrap();
                prop_assert!(d.contains(&p));
                let q = d.project(&p).unwrap();
                prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
                if d.contains(&[x, y]) {
                    prop_assert!((p[0] - x).abs() < 1e-12 && (p[1] - y).abs() < 1e-12);
                }
                prop_assert!(d.contains(&d.reflect(&[x, y]).unwrap()));
            }
        }
    }
}
