use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

type Metric = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Tolerance of the pairwise Lipschitz check on the supplied values.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// Clamped McShane extension
/// `f̃(x) = ((sup_a {f(a) − H·d(a, x)}) ∧ sup f) ∨ inf f`
/// of an `H`-Lipschitz function given on finitely many points.
#[derive(Clone)]
pub struct McShaneExtension {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    lipschitz: f64,
    lower: f64,
    upper: f64,
    metric: Metric,
}

impl fmt::Debug for McShaneExtension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("McShaneExtension")
            .field("points", &self.points.len())
            .field("lipschitz", &self.lipschitz)
            .field("bounds", &(self.lower, self.upper))
            .finish()
    }
}

/// Extends `values` on `points` to the whole ambient space of `metric`.
/// Fails with [`Error::NotLipschitz`] if some pair violates
/// `|f(a) − f(b)| ≤ H·d(a, b) + 1e-9`.
pub fn mcshane_extend<D>(
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    lipschitz: f64,
    metric: D,
) -> Result<McShaneExtension>
where
    D: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
{
    if points.is_empty() || points.len() != values.len() {
        return Err(Error::InvalidArgument(
            "need one value per point and at least one point".into(),
        ));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "Lipschitz constant and values must be finite".into(),
        ));
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let gap = (values[i] - values[j]).abs();
            let bound = lipschitz * metric(&points[i], &points[j]) + LIPSCHITZ_SLACK;
            if gap > bound {
                return Err(Error::NotLipschitz {
                    lipschitz,
                    gap,
                    bound,
                });
            }
        }
    }
    let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(McShaneExtension {
        points,
        values,
        lipschitz,
        lower,
        upper,
        metric: Arc::new(metric),
    })
}

impl McShaneExtension {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (a, &v) in self.points.iter().zip(&self.values) {
            let d = (self.metric)(a, x);
            if d == 0.0 {
                // on the domain the supremum is attained at a = x; return it
                // exactly rather than through rounded competitors
                return v;
            }
            best = best.max(v - self.lipschitz * d);
        }
        best.min(self.upper).max(self.lower)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `(inf f, sup f)` over the domain, which bound the extension.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
