use super::exact::{check_balanced, wasserstein_exact};
use super::measure::DiscreteMeasure;
use crate::spaces::circle_dist;
use crate::{Error, Result};

/// Largest atom count per side for which circle transport is solved by
/// lifting instead of linear programming.
pub const CIRCLE_LIFT_MAX_ATOMS: usize = 64;

fn require_1d(mu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() == 1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "expected atoms on the line, got dimension {}",
            mu.dim()
        )))
    }
}

fn sorted(mu: &DiscreteMeasure) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = mu
        .atoms()
        .map(|x| x[0])
        .zip(mu.weights().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// The monotone (quantile) coupling as pieces `(mass, x₀, x₁)` in
/// increasing order.
pub fn quantile_coupling(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
) -> Result<Vec<(f64, f64, f64)>> {
    require_1d(mu0)?;
    require_1d(mu1)?;
    check_balanced(mu0, mu1)?;
    let (xs, a) = sorted(mu0);
    let (ys, b) = sorted(mu1);
    // merge the cumulative levels; levels within LEVEL_TIE of each other are
    // one level, so round-off never creates slivers pairing distant atoms
    const LEVEL_TIE: f64 = 1e-14;
    let levels = |w: &[f64]| {
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut out: Vec<f64> = w
            .iter()
            .map(|x| {
                acc += x;
                acc / total
            })
            .collect();
        *out.last_mut().unwrap() = 1.0;
        out
    };
    let (ca, cb) = (levels(&a), levels(&b));
    let mut pieces = Vec::with_capacity(xs.len() + ys.len());
    let (mut i, mut j) = (0, 0);
    let mut level = 0.0;
    while i < xs.len() && j < ys.len() {
        let next = ca[i].min(cb[j]);
        if next - level > 0.0 {
            pieces.push((next - level, xs[i], ys[j]));
        }
        level = next;
        let advance_i = ca[i] <= level + LEVEL_TIE;
        let advance_j = cb[j] <= level + LEVEL_TIE;
        if advance_i {
            i += 1;
        }
        if advance_j {
            j += 1;
        }
        if advance_i && advance_j {
            level = level.max(ca[i - 1]).max(cb[j - 1]);
        }
    }
    Ok(pieces)
}

/// `W_p` on the real line, `(∫₀¹ |F_μ⁻¹ − F_ν⁻¹|^p)^{1/p}`.
pub fn wasserstein_1d(p: f64, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Wasserstein exponent must be >= 1, got {p}"
        )));
    }
    let cost: f64 = quantile_coupling(mu, nu)?
        .iter()
        .map(|&(m, x, y)| m * (x - y).abs().powf(p))
        .sum();
    Ok(cost.powf(1.0 / p))
}

/// The point at time `t` of the `W₂` geodesic from `mu0` to `mu1` built on
/// the quantile coupling.
pub fn displacement_interpolation_1d(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    t: f64,
) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    let pieces = quantile_coupling(mu0, mu1)?;
    let atoms = pieces
        .iter()
        .map(|&(_, x, y)| vec![(1.0 - t) * x + t * y])
        .collect();
    let weights = pieces.iter().map(|&(m, _, _)| m).collect();
    DiscreteMeasure::normalized(1, atoms, weights)
}

struct CircleLaw {
    positions: Vec<f64>,
    starts: Vec<f64>,
}

impl CircleLaw {
    fn new(mu: &DiscreteMeasure, length: f64) -> Self {
        let mut pairs: Vec<(f64, f64)> = mu
            .atoms()
            .map(|x| x[0].rem_euclid(length))
            .zip(mu.weights().iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut starts = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for &(_, w) in &pairs {
            starts.push(acc / total);
            acc += w;
        }
        CircleLaw {
            positions: pairs.into_iter().map(|p| p.0).collect(),
            starts,
        }
    }

    /// Quantile of the lifted law at level `u ∈ ℝ`, extended by
    /// `F⁻¹(u + 1) = F⁻¹(u) + L`.
    fn quantile(&self, u: f64, length: f64) -> f64 {
        let k = u.floor();
        let frac = u - k;
        let idx = self.starts.partition_point(|&s| s <= frac) - 1;
        self.positions[idx] + k * length
    }
}

fn lifted_cost(mu: &CircleLaw, nu: &CircleLaw, theta: f64, length: f64, p: f64) -> f64 {
    let mut levels: Vec<f64> = mu.starts.clone();
    levels.extend(nu.starts.iter().map(|s| (s - theta).rem_euclid(1.0)));
    levels.push(1.0);
    levels.sort_by(f64::total_cmp);
    let mut cost = 0.0;
    for pair in levels.windows(2) {
        let len = pair[1] - pair[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (pair[0] + pair[1]);
        cost += len
            * (mu.quantile(mid, length) - nu.quantile(mid + theta, length))
                .abs()
                .powf(p);
    }
    cost
}

/// `W₁` on the circle: `min_α ∫₀^L |F(x) − G(x) − α| dx`, attained at a
/// Lebesgue-weighted median `α` of the CDF difference.
fn circle_w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure, length: f64) -> f64 {
    let mut jumps: Vec<(f64, f64)> = mu
        .atoms()
        .zip(mu.weights())
        .map(|(x, &w)| (x[0].rem_euclid(length), w))
        .chain(
            nu.atoms()
                .zip(nu.weights())
                .map(|(x, &w)| (x[0].rem_euclid(length), -w)),
        )
        .collect();
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    // (length, value) of the CDF difference on each gap, wrap-around gap first
    let mut pieces = Vec::with_capacity(jumps.len() + 1);
    let mut level = 0.0;
    let mut previous = 0.0;
    for &(x, w) in &jumps {
        pieces.push((x - previous, level));
        level += w;
        previous = x;
    }
    pieces.push((length - previous, level));
    let mut by_value = pieces.clone();
    by_value.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut acc = 0.0;
    let alpha = by_value
        .iter()
        .find(|(len, _)| {
            acc += len;
            acc >= 0.5 * length
        })
        .map_or(0.0, |p| p.1);
    pieces.iter().map(|(len, v)| len * (v - alpha).abs()).sum()
}

/// `W_p` on the circle of length `length` with its geodesic metric.
///
/// `W₁` uses the closed form over the CDF difference. For `p > 1`, up to [`CIRCLE_LIFT_MAX_ATOMS`] atoms per side, the optimum is the best
/// lift to the line over all relative shifts of the cumulative levels (the
/// lifted cost is piecewise linear in the shift, so only level coincidences
/// need checking); larger supports fall back to the exact LP on geodesic
/// distances.
pub fn wasserstein_circle(
    p: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    length: f64,
) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Wasserstein exponent must be >= 1, got {p}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(
            "circle length must be positive".into(),
        ));
    }
    require_1d(mu)?;
    require_1d(nu)?;
    check_balanced(mu, nu)?;
    if p == 1.0 {
        return Ok(circle_w1(mu, nu, length));
    }
    if mu.len() > CIRCLE_LIFT_MAX_ATOMS || nu.len() > CIRCLE_LIFT_MAX_ATOMS {
        return wasserstein_exact(p, mu, nu, |x, y| circle_dist(x[0], y[0], length))
            .map(|(w, _)| w);
    }
    let a = CircleLaw::new(mu, length);
    let b = CircleLaw::new(nu, length);
    let mut best = f64::INFINITY;
    for &sa in &a.starts {
        for &sb in &b.starts {
            for k in [-1.0, 0.0, 1.0] {
                best = best.min(lifted_cost(&a, &b, sb - sa + k, length, p));
            }
        }
    }
    Ok(best.powf(1.0 / p))
}
