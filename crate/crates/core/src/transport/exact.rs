use super::measure::{DiscreteMeasure, TransportPlan};
use super::one_d::{wasserstein_1d, wasserstein_circle};
use super::simplex::min_cost_flow;
use crate::spaces::{PmmSpace, SpaceKind};
use crate::{Error, Result};

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "Wasserstein exponent must be >= 1, got {p}"
        )))
    }
}

pub(crate) fn check_balanced(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let a: f64 = mu.weights().iter().sum();
    let b: f64 = nu.weights().iter().sum();
    if (a - b).abs() > 1e-9 {
        return Err(Error::Unbalanced(a, b));
    }
    Ok(())
}

/// `W_p(μ, ν)` for the ground metric `metric`, by network simplex on the
/// complete bipartite graph with costs `d^p`. The returned plan carries the
/// solver's complementary-slackness certificate.
pub fn wasserstein_exact<D>(
    p: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    metric: D,
) -> Result<(f64, TransportPlan)>
where
    D: Fn(&[f64], &[f64]) -> f64,
{
    check_exponent(p)?;
    check_balanced(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    let mut arcs = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let d = metric(mu.atom(i), nu.atom(j));
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::NonFiniteCost(i, j));
            }
            arcs.push((i, m + j, d.powf(p)));
        }
    }
    let supply: Vec<f64> = mu
        .weights()
        .iter()
        .copied()
        .chain(nu.weights().iter().map(|w| -w))
        .collect();
    let solution = min_cost_flow(m + n, &supply, &arcs)?;

    let mut dual_violation: f64 = 0.0;
    for &(s, t, c) in &arcs {
        let reduced = c + solution.potential[s] - solution.potential[t];
        dual_violation = dual_violation.min(reduced);
    }
    let entries: Vec<(usize, usize, f64)> = arcs
        .iter()
        .zip(&solution.flow)
        .filter(|(_, f)| **f > 0.0)
        .map(|(&(s, t, _), &f)| (s, t - m, f))
        .collect();
    let plan = TransportPlan {
        rows: m,
        cols: n,
        entries,
        dual_violation,
        duality_gap: solution.duality_gap(&supply),
    };
    Ok((solution.cost.max(0.0).powf(1.0 / p), plan))
}

/// `W_p` on `space`: quantile formula on the line and on intervals, cyclic
/// lifting on the circle, network simplex with the space's metric otherwise.
pub fn wasserstein_on_space(
    space: &PmmSpace,
    p: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    check_exponent(p)?;
    if mu.dim() != space.chart_dim() || nu.dim() != space.chart_dim() {
        return Err(Error::InvalidArgument(
            "measure dimension differs from the space".into(),
        ));
    }
    match space.kind() {
        SpaceKind::Circle { circumference } => wasserstein_circle(p, mu, nu, *circumference),
        SpaceKind::Interval { .. } => wasserstein_1d(p, mu, nu),
        SpaceKind::EuclideanLogConcave { dim: 1, .. }
        | SpaceKind::ConvexDomainLogConcave { dim: 1, .. } => wasserstein_1d(p, mu, nu),
        _ => wasserstein_exact(p, mu, nu, |x, y| space.distance(x, y)).map(|(w, _)| w),
    }
}

/// `W₁` between two histograms on a regular grid with the ℓ¹ (sum) ground
/// metric, solved as a flow on the grid graph whose edges join neighbouring
/// bins at cost `spacing[axis]`; periodic axes wrap around.
///
/// Histograms are in row-major order over `shape` and must carry equal
/// total mass.
pub fn grid_w1(
    a: &[f64],
    b: &[f64],
    shape: &[usize],
    spacing: &[f64],
    periodic: &[bool],
) -> Result<f64> {
    let nodes: usize = shape.iter().product();
    if a.len() != nodes
        || b.len() != nodes
        || spacing.len() != shape.len()
        || periodic.len() != shape.len()
    {
        return Err(Error::InvalidArgument("grid shapes do not match".into()));
    }
    let total_a: f64 = a.iter().sum();
    let total_b: f64 = b.iter().sum();
    if (total_a - total_b).abs() > 1e-9 * total_a.max(1.0) {
        return Err(Error::Unbalanced(total_a, total_b));
    }
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let mut arcs = Vec::new();
    for node in 0..nodes {
        for axis in 0..shape.len() {
            let coord = (node / strides[axis]) % shape[axis];
            let neighbour = if coord + 1 < shape[axis] {
                Some(node + strides[axis])
            } else if periodic[axis] && shape[axis] > 2 {
                Some(node - coord * strides[axis])
            } else {
                None
            };
            if let Some(v) = neighbour {
                arcs.push((node, v, spacing[axis]));
                arcs.push((v, node, spacing[axis]));
            }
        }
    }
    let supply: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(min_cost_flow(nodes, &supply, &arcs)?.cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(x: &[f64], y: &[f64]) -> f64 {
        (x[0] - y[0]).abs()
    }

    #[test]
    fn single_pair_coupling() {
        let mu = DiscreteMeasure::dirac(vec![0.0]);
        let nu = DiscreteMeasure::dirac(vec![3.0]);
        for p in [1.0, 2.0] {
            let (w, plan) = wasserstein_exact(p, &mu, &nu, abs).unwrap();
            assert!((w - 3.0).abs() < 1e-12);
            assert_eq!(plan.entries, vec![(0, 0, 1.0)]);
        }
    }

    #[test]
    fn identical_measures_use_the_diagonal() {
        let mu = DiscreteMeasure::new(
            1,
            vec![vec![0.0], vec![1.0], vec![4.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let (w, plan) = wasserstein_exact(2.0, &mu, &mu, abs).unwrap();
        assert_eq!(w, 0.0);
        let q = plan.dense();
        for (i, row) in q.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if i == j {
                    assert!((m - mu.weights()[i]).abs() < 1e-15);
                } else {
                    assert_eq!(m, 0.0);
                }
            }
        }
    }

    #[test]
    fn grid_w1_moves_one_bin() {
        let a = [1.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 1.0];
        assert!((grid_w1(&a, &b, &[4], &[0.5], &[false]).unwrap() - 1.5).abs() < 1e-15);
        assert!((grid_w1(&a, &b, &[4], &[0.5], &[true]).unwrap() - 0.5).abs() < 1e-15);
        let a2 = [1.0, 0.0, 0.0, 0.0];
        let b2 = [0.0, 0.0, 0.0, 1.0];
        assert!(
            (grid_w1(&a2, &b2, &[2, 2], &[1.0, 2.0], &[false, false]).unwrap() - 3.0).abs() < 1e-15
        );
    }
}
