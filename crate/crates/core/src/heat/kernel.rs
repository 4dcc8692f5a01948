use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::finite::FiniteSemigroup;
use crate::error::check_time;
use crate::numeric::integrate;
use crate::spaces::{ConvexDomain, PmmSpace, Potential, SpaceKind};
use crate::{Error, Result};

/// Nodes per circle factor for one-dimensional norm quadratures.
pub const CIRCLE_NODES: usize = 2048;

/// Default number of finite-volume cells for weighted intervals.
pub const DEFAULT_CELLS: usize = 512;

/// Heat kernel density `p(t, x, y)` with respect to the reference measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatKernelValue {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralGap {
    pub value: f64,
    /// Set when the space splits into several components; `value` is then 0.
    pub disconnected: bool,
}

/// Heat semigroup of a [`PmmSpace`]: closed-form kernels on the analytic
/// models, matrix exponentials on finite spaces and on finite-volume
/// discretizations of weighted intervals.
#[derive(Clone, Debug)]
pub struct SpectralKernel {
    space: PmmSpace,
    repr: Repr,
}

#[derive(Clone, Debug)]
pub(crate) enum Repr {
    Circle {
        circumference: f64,
    },
    Torus {
        first: f64,
        second: f64,
    },
    /// Neumann heat kernel on `[a, b]`.
    Neumann {
        a: f64,
        b: f64,
    },
    /// Reflecting half-line with boundary point `edge`.
    HalfLine {
        edge: f64,
    },
    Gaussian {
        dim: usize,
    },
    /// Ornstein–Uhlenbeck kernel for `V = α|x|²/2`.
    Ou {
        stiffness: f64,
        dim: usize,
    },
    Finite(Arc<FiniteSemigroup>),
    Cells(Arc<Cells>),
}

/// Finite-volume discretization of a weighted interval `[lo, hi]` with
/// density `e^{−V}`: cell masses `∫ e^{−V}`, face conductances `e^{−V}/h`.
#[derive(Debug)]
pub(crate) struct Cells {
    pub lo: f64,
    pub h: f64,
    pub masses: Vec<f64>,
    pub semigroup: FiniteSemigroup,
}

impl Cells {
    fn new(lo: f64, hi: f64, potential: &Potential, n: usize) -> Self {
        let h = (hi - lo) / n as f64;
        let density = |x: f64| (-potential.value(&[x])).exp();
        let masses: Vec<f64> = (0..n)
            .map(|j| integrate(density, lo + j as f64 * h, lo + (j + 1) as f64 * h, 4, 8))
            .collect();
        let mut conductance = vec![0.0; n * n];
        for j in 0..n - 1 {
            let w = density(lo + (j + 1) as f64 * h) / h;
            conductance[j * n + j + 1] = w;
            conductance[(j + 1) * n + j] = w;
        }
        let semigroup = FiniteSemigroup::from_parts(masses.clone(), conductance, vec![0; n]);
        Cells {
            lo,
            h,
            masses,
            semigroup,
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn cell(&self, x: f64) -> usize {
        (((x - self.lo) / self.h).floor().max(0.0) as usize).min(self.len() - 1)
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.h
    }
}

/// `p(t, x, y)` on a circle of circumference `l` as a function of `Δ = x − y`.
///
/// Uses the wrapped Gaussian for `t(2π/l)² < 0.3` and the Fourier series
/// otherwise; both are summed until the remaining terms fall below `1e-17`.
pub fn circle_kernel(l: f64, t: f64, delta: f64) -> f64 {
    let mut d = delta.rem_euclid(l);
    if d > l / 2.0 {
        d -= l;
    }
    let tau = t * (2.0 * PI / l).powi(2);
    if tau < 0.3 {
        let mut sum = (-d * d / (4.0 * t)).exp();
        for j in 1.. {
            let jl = j as f64 * l;
            let term =
                (-(d + jl).powi(2) / (4.0 * t)).exp() + (-(d - jl).powi(2) / (4.0 * t)).exp();
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        sum / (4.0 * PI * t).sqrt()
    } else {
        let mut sum = 1.0;
        for k in 1.. {
            let w = 2.0 * PI * k as f64 / l;
            let e = (-w * w * t).exp();
            sum += 2.0 * e * (w * d).cos();
            if e < 1e-17 {
                break;
            }
        }
        sum / l
    }
}

/// Neumann heat kernel on `[a, a + len]`: the circle of circumference
/// `2·len` folded onto the interval.
pub fn neumann_kernel(a: f64, len: f64, t: f64, x: f64, y: f64) -> f64 {
    circle_kernel(2.0 * len, t, x - y) + circle_kernel(2.0 * len, t, x + y - 2.0 * a)
}

/// Gaussian kernel of the line, variance `2t`.
pub fn gaussian_kernel(t: f64, delta: f64) -> f64 {
    (-delta * delta / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// One-dimensional OU transition density with respect to `e^{−αy²/2} dy`.
pub fn ou_kernel(stiffness: f64, t: f64, x: f64, y: f64) -> f64 {
    let (mean, var) = ou_moments(stiffness, t, x);
    ((-(y - mean).powi(2) / (2.0 * var)) + 0.5 * stiffness * y * y).exp() / (2.0 * PI * var).sqrt()
}

/// Mean and variance of the OU transition law started at `x`.
pub fn ou_moments(stiffness: f64, t: f64, x: f64) -> (f64, f64) {
    (
        x * (-stiffness * t).exp(),
        -(-2.0 * stiffness * t).exp_m1() / stiffness,
    )
}

impl SpectralKernel {
    pub fn new(space: &PmmSpace) -> Result<Self> {
        Self::with_cells(space, DEFAULT_CELLS)
    }

    /// As [`Self::new`], with `cells` finite-volume cells when the space is a
    /// weighted interval without a closed-form kernel.
    pub fn with_cells(space: &PmmSpace, cells: usize) -> Result<Self> {
        let repr = match space.kind() {
            SpaceKind::Circle { circumference } => Repr::Circle {
                circumference: *circumference,
            },
            SpaceKind::Torus { first, second } => Repr::Torus {
                first: *first,
                second: *second,
            },
            SpaceKind::Interval { a, b } => Repr::Neumann { a: *a, b: *b },
            SpaceKind::Finite(f) => Repr::Finite(Arc::new(FiniteSemigroup::new(f))),
            SpaceKind::EuclideanLogConcave { dim, potential } => {
                match potential.quadratic_stiffness() {
                    Some(0.0) => Repr::Gaussian { dim: *dim },
                    Some(s) => Repr::Ou {
                        stiffness: s,
                        dim: *dim,
                    },
                    None => {
                        return Err(Error::Unsupported(format!(
                            "heat kernel for {potential:?} on R^{dim}"
                        )))
                    }
                }
            }
            SpaceKind::ConvexDomainLogConcave {
                dim: 1,
                potential,
                domain: ConvexDomain::Box { lower, upper },
            } => {
                let (lo, hi) = (lower[0], upper[0]);
                match (potential, lo.is_finite(), hi.is_finite()) {
                    (Potential::Zero, true, true) => Repr::Neumann { a: lo, b: hi },
                    (Potential::Zero, true, false) => Repr::HalfLine { edge: lo },
                    (Potential::Zero, false, true) => Repr::HalfLine { edge: hi },
                    (_, true, true) => {
                        if cells < 2 {
                            return Err(Error::InvalidArgument("need at least two cells".into()));
                        }
                        Repr::Cells(Arc::new(Cells::new(lo, hi, potential, cells)))
                    }
                    _ => {
                        return Err(Error::Unsupported(
                            "weighted unbounded domain heat kernel".into(),
                        ))
                    }
                }
            }
            SpaceKind::ConvexDomainLogConcave { .. } => {
                return Err(Error::Unsupported(
                    "heat kernel on multi-dimensional convex domains".into(),
                ))
            }
        };
        Ok(SpectralKernel {
            space: space.clone(),
            repr,
        })
    }

    pub fn space(&self) -> &PmmSpace {
        &self.space
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    /// Underlying matrix semigroup on finite spaces and cell discretizations.
    pub fn finite_semigroup(&self) -> Option<&FiniteSemigroup> {
        match &self.repr {
            Repr::Finite(s) => Some(s),
            Repr::Cells(c) => Some(&c.semigroup),
            _ => None,
        }
    }

    pub fn heat_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<HeatKernelValue> {
        Ok(HeatKernelValue {
            t,
            x: x.to_vec(),
            y: y.to_vec(),
            density: self.density(t, x, y)?,
        })
    }

    /// `p(t, x, y)` with domain checks.
    pub fn density(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        check_time(t)?;
        self.space.check_point(x)?;
        self.space.check_point(y)?;
        Ok(self.density_unchecked(t, x, y))
    }

    pub(crate) fn density_unchecked(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let raw = match &self.repr {
            Repr::Circle { circumference } => circle_kernel(*circumference, t, x[0] - y[0]),
            Repr::Torus { first, second } => {
                circle_kernel(*first, t, x[0] - y[0]) * circle_kernel(*second, t, x[1] - y[1])
            }
            Repr::Neumann { a, b } => neumann_kernel(*a, b - a, t, x[0], y[0]),
            Repr::HalfLine { edge } => {
                gaussian_kernel(t, x[0] - y[0]) + gaussian_kernel(t, x[0] + y[0] - 2.0 * edge)
            }
            Repr::Gaussian { .. } => x
                .iter()
                .zip(y)
                .map(|(a, b)| gaussian_kernel(t, a - b))
                .product(),
            Repr::Ou { stiffness, .. } => x
                .iter()
                .zip(y)
                .map(|(a, b)| ou_kernel(*stiffness, t, *a, *b))
                .product(),
            Repr::Finite(s) => {
                let (i, j) = (x[0] as usize, y[0] as usize);
                s.matrix(t)[i * s.len() + j] / s.weights()[j]
            }
            Repr::Cells(c) => {
                let (i, j) = (c.cell(x[0]), c.cell(y[0]));
                c.semigroup.matrix(t)[i * c.len() + j] / c.masses[j]
            }
        };
        raw / self.space.mass_scale()
    }

    /// `p(t, x, x)` computed as `‖p(t/2, x, ·)‖²_{L²(m)}` by quadrature
    /// (exact sums on finite spaces). Consistency with the direct kernel
    /// value is Chapman–Kolmogorov plus symmetry.
    pub fn on_diagonal(&self, t: f64, x: &[f64]) -> Result<f64> {
        check_time(t)?;
        self.space.check_point(x)?;
        let s = t / 2.0;
        let raw = match &self.repr {
            Repr::Circle { circumference } => periodic_square_norm(*circumference, s, x[0]),
            Repr::Torus { first, second } => {
                periodic_square_norm(*first, s, x[0]) * periodic_square_norm(*second, s, x[1])
            }
            Repr::Neumann { a, b } => {
                let n = CIRCLE_NODES;
                let h = (b - a) / n as f64;
                (0..n)
                    .map(|j| neumann_kernel(*a, b - a, s, x[0], a + (j as f64 + 0.5) * h).powi(2))
                    .sum::<f64>()
                    * h
            }
            Repr::HalfLine { edge } => {
                let reach = (x[0] - edge).abs() + 40.0 * s.sqrt();
                let p = |y: f64| {
                    gaussian_kernel(s, x[0] - y) + gaussian_kernel(s, x[0] + y - 2.0 * edge)
                };
                let (lo, hi) = if reach.is_finite() && x[0] >= *edge {
                    (*edge, edge + reach)
                } else {
                    (edge - reach, *edge)
                };
                integrate(|y| p(y).powi(2), lo, hi, 400, 8)
            }
            Repr::Gaussian { .. } => x
                .iter()
                .map(|&c| {
                    let w = 40.0 * s.sqrt();
                    integrate(|y| gaussian_kernel(s, c - y).powi(2), c - w, c + w, 400, 8)
                })
                .product(),
            Repr::Ou { stiffness, .. } => x
                .iter()
                .map(|&c| {
                    let (_, var) = ou_moments(*stiffness, s, c);
                    let w = 2.0 * c.abs() + 40.0 * (var.sqrt() + 1.0 / stiffness.sqrt());
                    integrate(
                        |y| {
                            ou_kernel(*stiffness, s, c, y).powi(2)
                                * (-0.5 * stiffness * y * y).exp()
                        },
                        -w,
                        w,
                        800,
                        8,
                    )
                })
                .product(),
            Repr::Finite(sg) => {
                let i = x[0] as usize;
                let p = sg.matrix(s);
                (0..sg.len())
                    .map(|j| p[i * sg.len() + j].powi(2) / sg.weights()[j])
                    .sum()
            }
            Repr::Cells(c) => {
                let i = c.cell(x[0]);
                let p = c.semigroup.matrix(s);
                (0..c.len())
                    .map(|j| p[i * c.len() + j].powi(2) / c.masses[j])
                    .sum()
            }
        };
        Ok(raw / self.space.mass_scale())
    }

    /// Smallest nonzero eigenvalue of `−L` on a finite-mass space.
    pub fn spectral_gap(&self) -> Result<SpectralGap> {
        let connected = |value: f64| SpectralGap {
            value,
            disconnected: false,
        };
        match &self.repr {
            Repr::Circle { circumference } => Ok(connected((2.0 * PI / circumference).powi(2))),
            Repr::Torus { first, second } => Ok(connected((2.0 * PI / first.max(*second)).powi(2))),
            Repr::Neumann { a, b } => Ok(connected((PI / (b - a)).powi(2))),
            Repr::Ou { stiffness, .. } => Ok(connected(*stiffness)),
            Repr::Gaussian { .. } | Repr::HalfLine { .. } => Err(Error::InvalidArgument(
                "spectral gap needs a space of finite mass".into(),
            )),
            Repr::Finite(s) => Ok(finite_gap(s)),
            Repr::Cells(c) => Ok(finite_gap(&c.semigroup)),
        }
    }

    /// Draws `X_t` given `X_0 = x`: exact Gaussian constructions (wrapping,
    /// folding) on the analytic models, inverse CDF on transition rows.
    pub fn sample_step<R: Rng + ?Sized>(&self, t: f64, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(x.to_vec());
        }
        check_time(t)?;
        let sd = (2.0 * t).sqrt();
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        Ok(match &self.repr {
            Repr::Circle { circumference } => {
                vec![(x[0] + sd * normal()).rem_euclid(*circumference)]
            }
            Repr::Torus { first, second } => {
                vec![
                    (x[0] + sd * normal()).rem_euclid(*first),
                    (x[1] + sd * normal()).rem_euclid(*second),
                ]
            }
            Repr::Neumann { a, b } => vec![fold(x[0] + sd * normal(), *a, *b)],
            Repr::HalfLine { edge } => {
                let side = if x[0] >= *edge { 1.0 } else { -1.0 };
                vec![edge + side * (x[0] - edge + sd * normal()).abs()]
            }
            Repr::Gaussian { .. } => x.iter().map(|c| c + sd * normal()).collect(),
            Repr::Ou { stiffness, .. } => x
                .iter()
                .map(|&c| {
                    let (mean, var) = ou_moments(*stiffness, t, c);
                    mean + var.sqrt() * normal()
                })
                .collect(),
            Repr::Finite(s) => {
                let i = x[0] as usize;
                check_clipping(s, t)?;
                let p = s.matrix(t);
                vec![inverse_cdf(&p[i * s.len()..(i + 1) * s.len()], rng.random::<f64>())? as f64]
            }
            Repr::Cells(c) => {
                let i = c.cell(x[0]);
                check_clipping(&c.semigroup, t)?;
                let p = c.semigroup.matrix(t);
                vec![c.midpoint(inverse_cdf(
                    &p[i * c.len()..(i + 1) * c.len()],
                    rng.random::<f64>(),
                )?)]
            }
        })
    }
}

/// Clipping threshold beyond which a transition row is not trusted.
pub const CLIP_THRESHOLD: f64 = 1e-13;

fn check_clipping(s: &FiniteSemigroup, t: f64) -> Result<()> {
    let c = s.clipped(t);
    if c > CLIP_THRESHOLD {
        Err(Error::Unsampleable(-c))
    } else {
        Ok(())
    }
}

fn finite_gap(s: &FiniteSemigroup) -> SpectralGap {
    if s.component_count() > 1 || s.len() < 2 {
        return SpectralGap {
            value: 0.0,
            disconnected: s.component_count() > 1,
        };
    }
    SpectralGap {
        value: s.spectrum()[1],
        disconnected: false,
    }
}

/// `∫_circle p(s, x, y)² dy` by the periodic trapezoid rule.
fn periodic_square_norm(l: f64, s: f64, x: f64) -> f64 {
    let n = CIRCLE_NODES;
    let h = l / n as f64;
    (0..n)
        .map(|j| circle_kernel(l, s, x - j as f64 * h).powi(2))
        .sum::<f64>()
        * h
}

/// Reflects `y` into `[a, b]` (the even 2(b−a)-periodic fold).
pub fn fold(y: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    let u = (y - a).rem_euclid(2.0 * len);
    a + if u > len { 2.0 * len - u } else { u }
}

/// Index drawn from a probability row by inverse CDF.
pub(crate) fn inverse_cdf(row: &[f64], u: f64) -> Result<usize> {
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Unsampleable(total - 1.0));
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = j;
        if target < acc {
            return Ok(j);
        }
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_series_agree_across_the_crossover() {
        // direct eigen-sum oracle at every t, independent of the switch
        let eigen = |t: f64, d: f64| {
            let mut s = 1.0;
            for k in 1..400 {
                s += 2.0 * (-(k * k) as f64 * t).exp() * (k as f64 * d).cos();
            }
            s / (2.0 * PI)
        };
        for &t in &[0.05, 0.2, 0.29, 0.31, 0.5, 2.0] {
            for &d in &[0.0, 0.3, 1.7, PI] {
                let v = circle_kernel(2.0 * PI, t, d);
                assert!((v - eigen(t, d)).abs() < 1e-12, "t={t} d={d}");
            }
        }
        let mut direct = 1.0;
        for k in 1..60 {
            direct += 2.0 * (-0.5 * (k * k) as f64).exp();
        }
        assert!((circle_kernel(2.0 * PI, 0.5, 0.0) - direct / (2.0 * PI)).abs() < 1e-15);
        assert!((circle_kernel(2.0 * PI, 40.0, 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn errors_on_bad_input() {
        let k = SpectralKernel::new(&PmmSpace::interval(0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(
            k.density(0.0, &[0.5], &[0.5]),
            Err(Error::NonPositiveTime(_))
        ));
        assert!(matches!(
            k.density(1.0, &[1.5], &[0.5]),
            Err(Error::OutsideSpace(_))
        ));
    }

    #[test]
    fn fold_is_the_neumann_reflection() {
        assert!((fold(1.3, 0.0, 1.0) - 0.7).abs() < 1e-15);
        assert!((fold(-0.2, 0.0, 1.0) - 0.2).abs() < 1e-15);
        assert!((fold(2.4, 0.0, 1.0) - 0.4).abs() < 1e-15);
    }
}
