use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::spaces::{
    collapse_map_torus, mesh_cone, CollapseMap, ConvexDomain, MassMode, PmmSpace, Potential,
};
use crate::{Error, Result};

/// One pre-limit space with its collapse map onto the limit.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub n: usize,
    pub map: CollapseMap,
}

impl FamilyMember {
    pub fn space(&self) -> &PmmSpace {
        self.map.source()
    }
}

/// A sequence of pointed spaces `X_n` together with their limit `X_∞`.
#[derive(Clone, Debug)]
pub struct SpaceFamily {
    name: String,
    members: Vec<FamilyMember>,
    limit: PmmSpace,
}

fn same_space(a: &PmmSpace, b: &PmmSpace) -> bool {
    format!("{:?}", a.kind()) == format!("{:?}", b.kind())
        && a.base_point() == b.base_point()
        && a.mass_mode() == b.mass_mode()
}

impl SpaceFamily {
    /// Members must map onto `limit` and have finite fibre bounds.
    pub fn new(
        name: impl Into<String>,
        limit: PmmSpace,
        members: Vec<FamilyMember>,
    ) -> Result<Self> {
        for m in &members {
            if !same_space(m.map.target(), &limit) {
                return Err(Error::InvalidArgument(format!(
                    "member n = {} maps onto a different space",
                    m.n
                )));
            }
            let bound = m.map.fiber_diameter_bound();
            if !(bound.is_finite() && bound >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "member n = {} has fibre bound {bound}",
                    m.n
                )));
            }
        }
        Ok(SpaceFamily {
            name: name.into(),
            members,
            limit,
        })
    }

    /// `S¹(2π) × S¹(2π/n)` collapsing onto `S¹(2π)`, normalized measures.
    pub fn torus(ns: &[usize]) -> Result<Self> {
        let members = ns
            .iter()
            .map(|&n| {
                Ok(FamilyMember {
                    n,
                    map: collapse_map_torus(n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let limit = collapse_map_torus(1)?.target().clone();
        Self::new("torus_collapse", limit, members)
    }

    /// Meshed paraboloid cones `x = n(y² + z²)` collapsing onto `[0, 1]`
    /// with the limit measure `(3/2)√x dx`.
    pub fn cone(ns: &[usize], resolution: usize) -> Result<Self> {
        let limit = cone_limit()?;
        let members = ns
            .iter()
            .map(|&n| {
                Ok(FamilyMember {
                    n,
                    map: mesh_cone(n, resolution)?.1.with_target(limit.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new("cone_interval", limit, members)
    }

    /// `ℝ` with `e^{−V_n}`, `V_n = (1 + 1/n)|x|²/2`, normalized, tending to
    /// the standard Gaussian.
    pub fn ou(ns: &[usize]) -> Result<Self> {
        let ou = |stiffness: f64| {
            PmmSpace::euclidean(1, Potential::quadratic(stiffness))?
                .with_mass_mode(MassMode::Normalized)
        };
        let limit = ou(1.0)?;
        let members = ns
            .iter()
            .map(|&n| {
                let n = n.max(1);
                let map =
                    CollapseMap::identity(ou(1.0 + 1.0 / n as f64)?).with_target(limit.clone());
                Ok(FamilyMember { n, map })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new("ou_family", limit, members)
    }

    /// Uniform measures on `[0, 1 − 1/n]` (so `n ≥ 2`) inside `[0, 1]`,
    /// all pointed at 0; the inclusion is an isometric embedding.
    pub fn reflected(ns: &[usize]) -> Result<Self> {
        let segment = |hi: f64| {
            PmmSpace::convex_domain(Potential::Zero, ConvexDomain::interval(0.0, hi), vec![0.0])?
                .with_mass_mode(MassMode::Normalized)
        };
        let limit = segment(1.0)?;
        let members = ns
            .iter()
            .map(|&n| {
                if n < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "reflected family needs n >= 2, got {n}"
                    )));
                }
                let map = CollapseMap::identity(segment(1.0 - 1.0 / n as f64)?)
                    .with_target(limit.clone());
                Ok(FamilyMember { n, map })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new("reflected_family", limit, members)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn limit(&self) -> &PmmSpace {
        &self.limit
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `[0, 1]` with reference density proportional to `√x`, the limit of the
/// meshed cones.
pub fn cone_limit() -> Result<PmmSpace> {
    let half_log = Potential::custom(
        "-log(x)/2",
        0.0,
        |x: &[f64]| -0.5 * x[0].ln(),
        |x: &[f64]| vec![-0.5 / x[0]],
    );
    PmmSpace::convex_domain(half_log, ConvexDomain::interval(0.0, 1.0), vec![0.0])?
        .with_mass_mode(MassMode::Normalized)
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Bounded Lipschitz function on the limit space with declared constants.
///
/// On a pre-limit space it is pulled back as `f∘π + w·offset`, where
/// `offset` is the collapse map's fibre offset and `w` the fibre weight, so
/// that it is a Lipschitz function on the common space which sees the
/// collapsing direction. The declared Lipschitz constant includes `w`.
#[derive(Clone)]
pub struct LipschitzTestFunction {
    label: String,
    lipschitz: f64,
    sup: f64,
    bounded_support: bool,
    fiber_weight: f64,
    f: Evaluator,
}

impl fmt::Debug for LipschitzTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzTestFunction")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .field("sup", &self.sup)
            .field("fiber_weight", &self.fiber_weight)
            .finish()
    }
}

impl LipschitzTestFunction {
    pub fn new<F>(
        label: impl Into<String>,
        lipschitz: f64,
        sup: f64,
        bounded_support: bool,
        f: F,
    ) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        LipschitzTestFunction {
            label: label.into(),
            lipschitz,
            sup,
            bounded_support,
            fiber_weight: 0.0,
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), 0.0, c.abs(), false, move |_| c)
    }

    /// `cos(ω x₀ + φ)` of the first chart coordinate (take `ω` a multiple of
    /// `2π/L` on a circle of length `L`).
    pub fn cosine(frequency: f64, phase: f64) -> Self {
        Self::new(
            format!("cos({frequency}x+{phase})"),
            frequency.abs(),
            1.0,
            false,
            move |x| (frequency * x[0] + phase).cos(),
        )
    }

    /// `height · (1 − d(x, center)/width)₊`.
    pub fn hat(space: &PmmSpace, center: Vec<f64>, width: f64, height: f64) -> Self {
        let space = space.clone();
        let label = format!("hat({center:?},{width})");
        Self::new(label, height.abs() / width, height.abs(), true, move |x| {
            height * (1.0 - space.distance(x, &center) / width).max(0.0)
        })
    }

    /// `min(d(x, center), cap)`.
    pub fn distance_cap(space: &PmmSpace, center: Vec<f64>, cap: f64) -> Self {
        let space = space.clone();
        let label = format!("dist({center:?})^{cap}");
        Self::new(label, 1.0, cap, false, move |x| {
            space.distance(x, &center).min(cap)
        })
    }

    /// The first chart coordinate clamped to `[lo, hi]`.
    pub fn clamp(lo: f64, hi: f64) -> Self {
        Self::new(
            format!("clamp({lo},{hi})"),
            1.0,
            lo.abs().max(hi.abs()),
            false,
            move |x| x[0].clamp(lo, hi),
        )
    }

    /// `a·f + b`.
    pub fn scaled(self, a: f64, b: f64) -> Self {
        let inner = self.f.clone();
        LipschitzTestFunction {
            label: format!("{a}*{}+{b}", self.label),
            lipschitz: a.abs() * self.lipschitz,
            sup: a.abs() * self.sup + b.abs(),
            bounded_support: self.bounded_support && b == 0.0,
            fiber_weight: a * self.fiber_weight,
            f: Arc::new(move |x| a * inner(x) + b),
        }
    }

    /// Adds `weight · offset` on pre-limit spaces.
    pub fn with_fiber_weight(mut self, weight: f64) -> Self {
        self.lipschitz += weight.abs() - self.fiber_weight.abs();
        self.fiber_weight = weight;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn bounded_support(&self) -> bool {
        self.bounded_support
    }

    pub fn fiber_weight(&self) -> f64 {
        self.fiber_weight
    }

    /// Value on the limit space.
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// The function on the source of `map`.
    pub fn pullback<'a>(
        &'a self,
        map: &'a CollapseMap,
    ) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'a {
        move |x| {
            let base = (self.f)(&map.apply(x));
            if self.fiber_weight == 0.0 {
                base
            } else {
                base + self.fiber_weight * map.fiber_offset(x)
            }
        }
    }

    /// Bound on the pulled-back function given the fibre bound.
    pub fn pulled_sup(&self, fiber_bound: f64) -> f64 {
        self.sup + self.fiber_weight.abs() * fiber_bound
    }

    /// Largest sampled difference quotient on `space`; errors if it exceeds
    /// the declared constant by more than `1e-6` or a value exceeds the
    /// declared bound.
    pub fn verify<R: Rng>(&self, space: &PmmSpace, pairs: usize, rng: &mut R) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = space.sample_point(rng);
            let y = space.sample_point(rng);
            let (fx, fy) = (self.eval(&x), self.eval(&y));
            if fx.abs() > self.sup + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "{}: |f| = {} exceeds {}",
                    self.label,
                    fx.abs(),
                    self.sup
                )));
            }
            let d = space.distance(&x, &y);
            if d > 1e-12 {
                worst = worst.max((fx - fy).abs() / d);
            }
            if (fx - fy).abs() > (self.lipschitz + 1e-6) * d {
                return Err(Error::NotLipschitz {
                    lipschitz: self.lipschitz,
                    gap: (fx - fy).abs(),
                    bound: (self.lipschitz + 1e-6) * d,
                });
            }
        }
        Ok(worst)
    }
}
