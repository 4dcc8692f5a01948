use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_lr};

use super::domain::ConvexDomain;
use super::model::{PmmSpace, SpaceKind};
use super::potential::Potential;
use crate::numeric::{integrate, linear_fit};
use crate::{Error, Result};

/// Mass `m(B_r(center))` of the open ball.
pub fn ball_mass(space: &PmmSpace, center: &[f64], r: f64) -> Result<f64> {
    space.check_point(center)?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let scale = space.mass_scale();
    let raw = match space.kind() {
        SpaceKind::Circle { circumference } => (2.0 * r).min(*circumference),
        SpaceKind::Torus { first, second } => torus_ball_area(*first, *second, r),
        SpaceKind::Interval { a, b } => {
            ((center[0] + r).min(*b) - (center[0] - r).max(*a)).max(0.0)
        }
        SpaceKind::Finite(f) => {
            let c = center[0] as usize;
            return Ok((0..f.len())
                .filter(|&j| f.dist(c, j) < r)
                .map(|j| f.weights()[j])
                .sum::<f64>()
                * scale);
        }
        SpaceKind::EuclideanLogConcave { dim, potential } => {
            let at_origin = center.iter().all(|c| *c == 0.0);
            match potential {
                Potential::Zero => {
                    PI.powf(*dim as f64 / 2.0) / gamma(*dim as f64 / 2.0 + 1.0)
                        * r.powi(*dim as i32)
                }
                Potential::Quadratic { stiffness } if at_origin => {
                    let d = *dim as f64;
                    (2.0 * PI / stiffness).powf(d / 2.0)
                        * gamma_lr(d / 2.0, stiffness * r * r / 2.0)
                }
                _ => weighted_ball(*dim, potential, None, center, r)?,
            }
        }
        SpaceKind::ConvexDomainLogConcave {
            dim,
            potential,
            domain,
        } => weighted_ball(*dim, potential, Some(domain), center, r)?,
    };
    Ok(raw * scale)
}

/// Area of `{d < r}` on the flat torus `S¹(ℓ₁) × S¹(ℓ₂)`:
/// `2 ∫_0^{min(r, ℓ₁/2)} min(ℓ₂, 2√(r² − u²)) du`, integrated in closed form.
fn torus_ball_area(first: f64, second: f64, r: f64) -> f64 {
    let upper = r.min(first / 2.0);
    let antiderivative =
        |u: f64| u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin();
    let full = if r > second / 2.0 {
        (r * r - second * second / 4.0).sqrt().min(upper)
    } else {
        0.0
    };
    2.0 * (second * full + antiderivative(upper) - antiderivative(full))
}

fn weighted_ball(
    dim: usize,
    potential: &Potential,
    domain: Option<&ConvexDomain>,
    c: &[f64],
    r: f64,
) -> Result<f64> {
    let inside = |x: &[f64]| domain.is_none_or(|d| d.contains(x));
    let density = |x: &[f64]| {
        if inside(x) {
            (-potential.value(x)).exp()
        } else {
            0.0
        }
    };
    match dim {
        1 => {
            let (mut lo, mut hi) = (c[0] - r, c[0] + r);
            if let Some(ConvexDomain::Box { lower, upper }) = domain {
                lo = lo.max(lower[0]);
                hi = hi.min(upper[0]);
            }
            Ok(integrate(|x| density(&[x]), lo, hi, 400, 8))
        }
        2 => Ok(integrate(
            |rho| {
                rho * integrate(
                    |phi| density(&[c[0] + rho * phi.cos(), c[1] + rho * phi.sin()]),
                    0.0,
                    2.0 * PI,
                    64,
                    8,
                )
            },
            0.0,
            r,
            64,
            8,
        )),
        _ => Err(Error::Unsupported(format!(
            "ball mass quadrature in dimension {dim}"
        ))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeGrowthEntry {
    pub radius: f64,
    pub mass: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeGrowthReport {
    pub entries: Vec<VolumeGrowthEntry>,
    pub first_violation: Option<f64>,
    pub pass: bool,
}

/// Checks `m(B_r(x̄)) ≤ c₁ e^{c₂ r²}` at each radius.
pub fn volume_growth_check(
    space: &PmmSpace,
    c1: f64,
    c2: f64,
    radii: &[f64],
) -> Result<VolumeGrowthReport> {
    if radii.iter().any(|r| *r <= 0.0) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be positive and increasing".into(),
        ));
    }
    let mut entries = Vec::with_capacity(radii.len());
    let mut first_violation = None;
    for &r in radii {
        let mass = ball_mass(space, space.base_point(), r)?;
        let bound = c1 * (c2 * r * r).exp();
        if mass > bound && first_violation.is_none() {
            first_violation = Some(r);
        }
        entries.push(VolumeGrowthEntry {
            radius: r,
            mass,
            bound,
        });
    }
    Ok(VolumeGrowthReport {
        pass: first_violation.is_none(),
        entries,
        first_violation,
    })
}

/// `Θ_κ(θ)`: `sin(√κ θ)/√κ`, `θ`, or `sinh(√−κ θ)/√−κ` by the sign of κ.
pub fn theta(kappa: f64, t: f64) -> f64 {
    if kappa > 0.0 {
        let s = kappa.sqrt();
        (s * t).sin() / s
    } else if kappa < 0.0 {
        let s = (-kappa).sqrt();
        (s * t).sinh() / s
    } else {
        t
    }
}

/// `∫_0^r Θ_{K/N}(t)^N dt`.
pub fn theta_power_integral(k: f64, n: f64, r: f64) -> f64 {
    integrate(|t| theta(k / n, t).max(0.0).powf(n), 0.0, r, 64, 8)
}

#[derive(Clone, Debug, Serialize)]
pub struct BishopGromovEntry {
    pub radius: f64,
    pub mass: f64,
    /// `m(B_D) ∫_0^r Θ^N / ∫_0^D Θ^N`.
    pub lower_bound: f64,
    /// `c ∫_0^r Θ^N` with `c = 1/∫_0^D Θ^N`.
    pub scaled_profile: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BishopGromovReport {
    pub entries: Vec<BishopGromovEntry>,
    pub c: f64,
    /// Log-log slope of `r ↦ m(B_r(x̄))` over the non-degenerate radii (the `2ν` exponent).
    pub fitted_exponent: Option<f64>,
    pub pass: bool,
}

/// Compares ball masses around the base point against the generalized
/// Bishop–Gromov lower bound with parameters `(K, N, D)`.
pub fn bishop_gromov_check(
    space: &PmmSpace,
    n: f64,
    k: f64,
    d: f64,
    radii: &[f64],
) -> Result<BishopGromovReport> {
    if !(n > 1.0) && n != 1.0 {
        return Err(Error::InvalidArgument(format!(
            "N must be at least 1, got {n}"
        )));
    }
    if !space.is_bounded() {
        return Err(Error::InvalidArgument(
            "Bishop–Gromov check needs a bounded space".into(),
        ));
    }
    if radii.iter().any(|r| *r > d || *r <= 0.0) {
        return Err(Error::InvalidArgument("radii must lie in (0, D]".into()));
    }
    let full = theta_power_integral(k, n, d);
    let c = 1.0 / full;
    let mass_d = ball_mass(space, space.base_point(), d * (1.0 + 1e-12))?;
    let mut entries = Vec::new();
    let mut logs = (Vec::new(), Vec::new());
    for &r in radii {
        let mass = ball_mass(space, space.base_point(), r)?;
        let profile = theta_power_integral(k, n, r);
        let degenerate = mass <= 0.0;
        if !degenerate {
            logs.0.push(r.ln());
            logs.1.push(mass.ln());
        }
        entries.push(BishopGromovEntry {
            radius: r,
            mass,
            lower_bound: mass_d * profile * c,
            scaled_profile: c * profile,
            degenerate,
        });
    }
    let fitted_exponent = (logs.0.len() >= 2).then(|| linear_fit(&logs.0, &logs.1).0);
    let pass = entries
        .iter()
        .all(|e| !e.degenerate && e.mass >= e.lower_bound * (1.0 - 1e-12));
    Ok(BishopGromovReport {
        entries,
        c,
        fitted_exponent,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::FiniteMms;

    #[test]
    fn compact_volume_growth_passes() {
        let c = PmmSpace::circle(2.0 * PI).unwrap();
        assert!(
            volume_growth_check(&c, 2.0 * PI, 0.1, &[1.0, 2.0, 3.0])
                .unwrap()
                .pass
        );
        let f = FiniteMms::new(vec![0.0, 1.0, 1.0, 0.0], vec![2.0, 3.0], 0).unwrap();
        let s = PmmSpace::finite(f).unwrap();
        assert!(volume_growth_check(&s, 5.0, 0.0, &[0.5, 2.0]).unwrap().pass);
        let r = volume_growth_check(&c, 1.0, 0.0, &[0.2, 1.0, 2.0]).unwrap();
        assert_eq!(r.first_violation, Some(1.0));
    }

    #[test]
    fn gaussian_weighted_line_is_bounded_by_total_mass() {
        let s = PmmSpace::euclidean(1, Potential::quadratic(1.0)).unwrap();
        let rep = volume_growth_check(&s, 3.0, 0.0, &[0.5, 1.0, 4.0, 10.0]).unwrap();
        assert!(rep.pass);
        // closed form (regularized gamma) against direct quadrature of the tail
        let direct = integrate(|x| (-0.5 * x * x).exp(), -1.0, 1.0, 50, 8);
        assert!((rep.entries[1].mass - direct).abs() < 1e-12);
        assert!(rep.entries[3].mass <= (2.0 * PI).sqrt());
    }

    #[test]
    fn torus_ball_area_matches_dense_grid() {
        let second = 2.0 * PI / 4.0;
        let t = PmmSpace::torus(2.0 * PI, second).unwrap();
        for r in [0.1, 0.9, 1.5] {
            let exact = ball_mass(&t, &[0.0, 0.0], r).unwrap();
            // independent oracle: count cells of a dense grid
            let n = 2000;
            let (h1, h2) = (2.0 * PI / n as f64, second / n as f64);
            let mut area = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = [(i as f64 + 0.5) * h1, (j as f64 + 0.5) * h2];
                    if t.distance(&x, &[0.0, 0.0]) < r {
                        area += h1 * h2;
                    }
                }
            }
            assert!(
                (exact - area).abs() < 2e-3 * exact,
                "r={r}: {exact} vs {area}"
            );
        }
        assert!((ball_mass(&t, &[0.0, 0.0], 0.1).unwrap() - PI * 0.01).abs() < 1e-14);
    }

    #[test]
    fn bishop_gromov_on_interval_and_circle() {
        let i = PmmSpace::interval(0.0, 1.0)
            .unwrap()
            .with_base_point(vec![0.5])
            .unwrap();
        let radii = [0.1, 0.25, 0.5, 1.0];
        let rep = bishop_gromov_check(&i, 1.0, 0.0, 1.0, &radii).unwrap();
        assert!(rep.pass);
        for e in &rep.entries {
            assert!((e.mass - (2.0 * e.radius).min(1.0)).abs() < 1e-14);
            assert!(e.mass >= e.radius);
        }
        let c = PmmSpace::circle(2.0 * PI).unwrap();
        let rep = bishop_gromov_check(&c, 1.0, 0.0, PI, &[0.1, 0.5, 1.0, 2.0, 3.0]).unwrap();
        assert!(rep.pass);
        // m(B_r) = 2r exactly, so the fitted exponent is 1
        assert!((rep.fitted_exponent.unwrap() - 1.0).abs() < 1e-12);
        for e in &rep.entries {
            assert!((e.mass - 2.0 * e.radius).abs() < 1e-14);
        }
    }

    #[test]
    fn theta_branches() {
        assert!((theta(1.0, PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((theta(0.0, 0.7) - 0.7).abs() < 1e-15);
        assert!((theta(-1.0, 1.0) - 1.0f64.sinh()).abs() < 1e-15);
        assert!((theta_power_integral(0.0, 2.0, 1.5) - 1.5f64.powi(3) / 3.0).abs() < 1e-13);
    }
}
