use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::model::{MassMode, PmmSpace};
use crate::Result;

type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type OffsetFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// 1-Lipschitz map from a pre-limit space onto the limit space, standing in
/// for isometric embeddings into a common space. Points in one fibre are at
/// most `fiber_diameter_bound` apart.
///
/// `fiber_offset(x)` is a 1-Lipschitz function on the source, bounded by the
/// fibre bound and vanishing on a fixed section of the fibration; it lets
/// test functions on the common space see the fibre direction.
#[derive(Clone)]
pub struct CollapseMap {
    source: PmmSpace,
    target: PmmSpace,
    map: PointMap,
    fiber_offset: OffsetFn,
    fiber_diameter_bound: f64,
}

impl fmt::Debug for CollapseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CollapseMap")
            .field("source", self.source.kind())
            .field("target", self.target.kind())
            .field("fiber_diameter_bound", &self.fiber_diameter_bound)
            .finish()
    }
}

impl CollapseMap {
    pub fn new<M, O>(
        source: PmmSpace,
        target: PmmSpace,
        fiber_diameter_bound: f64,
        map: M,
        fiber_offset: O,
    ) -> Self
    where
        M: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        O: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        CollapseMap {
            source,
            target,
            map: Arc::new(map),
            fiber_offset: Arc::new(fiber_offset),
            fiber_diameter_bound,
        }
    }

    pub fn identity(space: PmmSpace) -> Self {
        Self::new(space.clone(), space, 0.0, |x| x.to_vec(), |_| 0.0)
    }

    /// Same map into a different target with the same chart (e.g. the limit
    /// interval equipped with its limit measure).
    pub fn with_target(mut self, target: PmmSpace) -> Self {
        self.target = target;
        self
    }

    pub fn source(&self) -> &PmmSpace {
        &self.source
    }

    pub fn target(&self) -> &PmmSpace {
        &self.target
    }

    pub fn fiber_diameter_bound(&self) -> f64 {
        self.fiber_diameter_bound
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    pub fn fiber_offset(&self, x: &[f64]) -> f64 {
        (self.fiber_offset)(x)
    }

    /// Largest `d_target(map x, map y) − d_source(x, y)` over random pairs.
    pub fn lipschitz_excess<R: Rng>(&self, pairs: usize, rng: &mut R) -> f64 {
        (0..pairs)
            .map(|_| {
                let x = self.source.sample_point(rng);
                let y = self.source.sample_point(rng);
                self.target.distance(&self.apply(&x), &self.apply(&y))
                    - self.source.distance(&x, &y)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest distance between two of the given points sharing an image.
    pub fn fiber_diameter_on(&self, points: &[Vec<f64>]) -> f64 {
        let images: Vec<Vec<f64>> = points.iter().map(|p| self.apply(p)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if self.target.distance(&images[i], &images[j]) <= 1e-12 {
                    worst = worst.max(self.source.distance(&points[i], &points[j]));
                }
            }
        }
        worst
    }
}

/// Projection of `S¹(2π) × S¹(2π/n)` onto its first factor. Both spaces carry
/// normalized Hausdorff measures and base points at the origin.
///
/// The fibre offset is `(ℓ/2π)(1 − cos(2πy/ℓ))` with `ℓ = 2π/n`: 1-Lipschitz,
/// at most `2/n`, and smooth, so periodic quadrature stays spectrally
/// accurate on functions built from it.
pub fn collapse_map_torus(n: usize) -> Result<CollapseMap> {
    let n = n.max(1);
    let second = 2.0 * PI / n as f64;
    let source = PmmSpace::torus(2.0 * PI, second)?.with_mass_mode(MassMode::Normalized)?;
    let target = PmmSpace::circle(2.0 * PI)?.with_mass_mode(MassMode::Normalized)?;
    Ok(CollapseMap::new(
        source,
        target,
        PI / n as f64,
        |x| vec![x[0].rem_euclid(2.0 * PI)],
        move |x| (second / (2.0 * PI)) * (1.0 - (2.0 * PI * x[1] / second).cos()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn torus_fibre_bounds() {
        assert!((collapse_map_torus(1).unwrap().fiber_diameter_bound() - PI).abs() < 1e-15);
        let m = collapse_map_torus(10).unwrap();
        assert!((m.fiber_diameter_bound() - 0.3141592653589793).abs() < 1e-15);
        // structured probes: one fibre sampled at 64 points
        let second = 2.0 * PI / 10.0;
        let fibre: Vec<Vec<f64>> = (0..64)
            .map(|j| vec![1.3, j as f64 * second / 64.0])
            .collect();
        let diam = m.fiber_diameter_on(&fibre);
        assert!(diam <= m.fiber_diameter_bound() + 1e-9);
        assert!(diam > 0.99 * m.fiber_diameter_bound());
    }

    #[test]
    fn torus_projection_is_one_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 8] {
            let m = collapse_map_torus(n).unwrap();
            assert!(m.lipschitz_excess(100, &mut rng) <= 1e-9);
            for _ in 0..100 {
                let x = m.source().sample_point(&mut rng);
                let y = m.source().sample_point(&mut rng);
                assert!(m.fiber_offset(&x) <= m.fiber_diameter_bound() + 1e-12);
                let gap = (m.fiber_offset(&x) - m.fiber_offset(&y)).abs();
                assert!(gap <= m.source().distance(&x, &y) + 1e-12);
            }
        }
    }
}
