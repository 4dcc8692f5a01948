use serde::Serialize;

use crate::numeric::{gauss_legendre, normal_cdf};
use crate::spaces::Potential;
use crate::{Error, Result};

/// An absolutely continuous law on the line with piecewise-uniform density:
/// mass `weights[k]` spread evenly over `[edges[k], edges[k+1]]`.
///
/// Two such laws with the same weight vector are joined by the `W₂`
/// geodesic that moves cell edges linearly, and every point of that
/// geodesic is again of this form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellMeasure {
    edges: Vec<f64>,
    weights: Vec<f64>,
}

impl CellMeasure {
    pub fn new(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || edges.len() != weights.len() + 1 {
            return Err(Error::InvalidArgument(
                "need one more edge than cells".into(),
            ));
        }
        if edges.windows(2).any(|e| !(e[1] > e[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument(
                "cell edges must be finite and strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(
                "cell weights must be positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        Ok(CellMeasure {
            edges,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Equal-mass cells between the quantiles at levels
    /// `tail + (1 − 2 tail) k / cells` of `quantile`.
    pub fn from_quantile<Q: Fn(f64) -> f64>(quantile: Q, cells: usize, tail: f64) -> Result<Self> {
        if cells == 0 || !(0.0..0.5).contains(&tail) {
            return Err(Error::InvalidArgument(
                "need cells > 0 and tail in [0, 1/2)".into(),
            ));
        }
        let edges: Vec<f64> = (0..=cells)
            .map(|k| quantile(tail + (1.0 - 2.0 * tail) * k as f64 / cells as f64))
            .collect();
        Self::new(edges, vec![1.0; cells])
    }

    /// `N(mean, sd²)` on `cells` equal-width cells spanning `mean ± 8 sd`.
    /// Two such laws share their cumulative levels, so they are already
    /// aligned for interpolation.
    pub fn gaussian(mean: f64, sd: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(sd > 0.0) {
            return Err(Error::InvalidArgument("need cells > 0 and sd > 0".into()));
        }
        let z: Vec<f64> = (0..=cells)
            .map(|k| -8.0 + 16.0 * k as f64 / cells as f64)
            .collect();
        // upper-tail masses from the mirrored lower tail to avoid cancellation
        let weights = z
            .windows(2)
            .map(|c| {
                if c[0] + c[1] > 0.0 {
                    normal_cdf(-c[0]) - normal_cdf(-c[1])
                } else {
                    normal_cdf(c[1]) - normal_cdf(c[0])
                }
            })
            .collect();
        Self::new(z.iter().map(|s| mean + sd * s).collect(), weights)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for w in &self.weights {
            acc += w;
            out.push(acc);
        }
        *out.last_mut().unwrap() = 1.0;
        out
    }

    fn quantile(&self, cumulative: &[f64], u: f64) -> f64 {
        let k = (cumulative.partition_point(|&c| c <= u).max(1) - 1).min(self.weights.len() - 1);
        let frac = ((u - cumulative[k]) / self.weights[k]).clamp(0.0, 1.0);
        self.edges[k] + frac * (self.edges[k + 1] - self.edges[k])
    }

    /// Refines both laws to the union of their cumulative levels so that they
    /// share one weight vector; the laws themselves are unchanged.
    pub fn align(&self, other: &CellMeasure) -> (CellMeasure, CellMeasure) {
        let (ca, cb) = (self.cumulative(), other.cumulative());
        let mut levels: Vec<f64> = ca.iter().chain(&cb).copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        let weights: Vec<f64> = levels.windows(2).map(|l| l[1] - l[0]).collect();
        let ea: Vec<f64> = levels.iter().map(|&u| self.quantile(&ca, u)).collect();
        let eb: Vec<f64> = levels.iter().map(|&u| other.quantile(&cb, u)).collect();
        (
            CellMeasure {
                edges: ea,
                weights: weights.clone(),
            },
            CellMeasure { edges: eb, weights },
        )
    }

    /// `Ent_m(μ) = ∫ ρ log ρ dx + ∫ V ρ dx` for `m = e^{−V} dx`, with the cell
    /// averages of `V` by 8-point Gauss–Legendre.
    pub fn entropy(&self, potential: &Potential) -> f64 {
        let (nodes, gl) = gauss_legendre(8);
        let mut ent = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            let len = b - a;
            let mean_v: f64 = nodes
                .iter()
                .zip(&gl)
                .map(|(s, g)| 0.5 * g * potential.value(&[a + 0.5 * len * (s + 1.0)]))
                .sum();
            ent += w * (w / len).ln() + w * mean_v;
        }
        ent
    }
}

fn aligned_interpolate(a: &CellMeasure, b: &CellMeasure, t: f64) -> CellMeasure {
    let edges = a
        .edges
        .iter()
        .zip(&b.edges)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect();
    CellMeasure {
        edges,
        weights: a.weights.clone(),
    }
}

/// `W₂²` between aligned laws: within a cell the edge displacement is affine
/// in the quantile level, so each cell contributes `w (a² + ab + b²) / 3`.
fn aligned_w2_squared(a: &CellMeasure, b: &CellMeasure) -> f64 {
    let d: Vec<f64> = a.edges.iter().zip(&b.edges).map(|(x, y)| y - x).collect();
    a.weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * (d[k] * d[k] + d[k] * d[k + 1] + d[k + 1] * d[k + 1]) / 3.0)
        .sum()
}

/// `W₂²(μ₀, μ₁)` for cell laws.
pub fn cell_w2_squared(mu0: &CellMeasure, mu1: &CellMeasure) -> f64 {
    let (a, b) = mu0.align(mu1);
    aligned_w2_squared(&a, &b)
}

/// The geodesic point `μ_t` between cell laws.
pub fn cell_interpolate(mu0: &CellMeasure, mu1: &CellMeasure, t: f64) -> CellMeasure {
    let (a, b) = mu0.align(mu1);
    aligned_interpolate(&a, &b, t)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityRow {
    pub t: f64,
    pub entropy: f64,
    /// `(1−t)Ent(μ₀) + t Ent(μ₁) − (K/2) t(1−t) W₂²`.
    pub bound: f64,
    /// `entropy − bound`; the inequality asks for `≤ 0`.
    pub excess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub k: f64,
    pub w2_squared: f64,
    pub rows: Vec<ConvexityRow>,
    /// Discretization margin: the largest gap between the cell entropy along
    /// the geodesic and the supplied exact entropy (0 without one), plus a
    /// round-off allowance.
    pub margin: f64,
    pub max_excess: f64,
    pub pass: bool,
}

/// Checks `Ent_m(μ_t) ≤ (1−t)Ent_m(μ₀) + t Ent_m(μ₁) − (K/2)t(1−t)W₂²(μ₀,μ₁)`
/// along the quantile geodesic of two cell laws, for `m = e^{−V} dx`.
///
/// `exact`, when given, is the entropy of the continuum geodesic at time `t`;
/// the margin is then twice the worst discretization error against it. The
/// check passes when every excess is at most the margin.
pub fn entropy_convexity_check(
    potential: &Potential,
    mu0: &CellMeasure,
    mu1: &CellMeasure,
    k: f64,
    times: &[f64],
    exact: Option<&dyn Fn(f64) -> f64>,
) -> Result<ConvexityReport> {
    if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument(
            "interpolation times must lie in [0, 1]".into(),
        ));
    }
    let (a, b) = mu0.align(mu1);
    let w2_squared = aligned_w2_squared(&a, &b);
    let e0 = a.entropy(potential);
    let e1 = b.entropy(potential);
    let mut discretization: f64 = 0.0;
    if let Some(exact) = exact {
        discretization = (e0 - exact(0.0)).abs().max((e1 - exact(1.0)).abs());
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut scale: f64 = e0.abs().max(e1.abs()).max(1.0);
    for &t in times {
        let entropy = aligned_interpolate(&a, &b, t).entropy(potential);
        if let Some(exact) = exact {
            discretization = discretization.max((entropy - exact(t)).abs());
        }
        scale = scale.max(entropy.abs());
        let bound = (1.0 - t) * e0 + t * e1 - 0.5 * k * t * (1.0 - t) * w2_squared;
        rows.push(ConvexityRow {
            t,
            entropy,
            bound,
            excess: entropy - bound,
        });
    }
    let margin = 2.0 * discretization + 1e-12 * scale;
    let max_excess = rows.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.excess));
    Ok(ConvexityReport {
        k,
        w2_squared,
        rows,
        margin,
        max_excess,
        pass: max_excess <= margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_preserves_the_law() {
        let a = CellMeasure::new(vec![0.0, 1.0, 3.0], vec![0.25, 0.75]).unwrap();
        let b = CellMeasure::new(vec![-1.0, 0.0, 0.5, 2.0], vec![0.5, 0.3, 0.2]).unwrap();
        let (aa, bb) = a.align(&b);
        assert_eq!(aa.weights(), bb.weights());
        assert_eq!(aa.weights().len(), 4);
        assert!((aa.entropy(&Potential::Zero) - a.entropy(&Potential::Zero)).abs() < 1e-14);
        assert!((bb.entropy(&Potential::Zero) - b.entropy(&Potential::Zero)).abs() < 1e-14);
    }

    #[test]
    fn translation_costs_the_shift() {
        let a = CellMeasure::new(vec![0.0, 1.0, 3.0], vec![0.25, 0.75]).unwrap();
        let b = CellMeasure::new(vec![2.0, 3.0, 5.0], vec![0.25, 0.75]).unwrap();
        assert!((cell_w2_squared(&a, &b) - 4.0).abs() < 1e-14);
    }
}
