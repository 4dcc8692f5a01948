use serde::Serialize;

use crate::spaces::{Quadrature, WeightBranch, WeightedMeasure};
use crate::Result;

/// `Ent_m(μ) = Σ μ_i log(μ_i / m_i)` for node masses of `μ` and of the
/// reference measure; `+∞` when `μ` charges a node where `m` vanishes.
pub fn relative_entropy(mu: &[f64], reference: &[f64]) -> f64 {
    let mut ent = 0.0;
    for (&p, &m) in mu.iter().zip(reference) {
        if p <= 0.0 {
            continue;
        }
        if m <= 0.0 {
            return f64::INFINITY;
        }
        ent += p * (p / m).ln();
    }
    ent
}

/// `∫ ρ log ρ dm` for a density `ρ = dμ/dm` on a quadrature rule for `m`.
pub fn relative_entropy_density<F: Fn(&[f64]) -> f64>(rule: &Quadrature, rho: F) -> f64 {
    let mu: Vec<f64> = (0..rule.len())
        .map(|i| rho(rule.point(i)) * rule.weights()[i])
        .collect();
    relative_entropy(&mu, rule.weights())
}

/// Both sides of `Ent_m(μ) = Ent_{m̃}(μ) − C∫d²(·,x̄)dμ − log z`.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyIdentity {
    pub ent_reference: f64,
    pub ent_weighted: f64,
    /// `C ∫ d²(·, x̄) dμ` (0 on the normalized branch).
    pub moment_term: f64,
    /// `log z` (`log m(X)` on the normalized branch).
    pub log_z: f64,
    pub residual: f64,
}

/// Evaluates the weighted-measure entropy identity for node probabilities
/// `mu` on a quadrature rule for `m`.
pub fn weighted_entropy_identity(
    weighted: &WeightedMeasure,
    rule: &Quadrature,
    mu: &[f64],
) -> Result<EntropyIdentity> {
    let space = weighted.space();
    let tilde = weighted.on_quadrature(rule);
    let ent_reference = relative_entropy(mu, rule.weights());
    let ent_weighted = relative_entropy(mu, &tilde);
    let c = match weighted.branch() {
        WeightBranch::Normalized => 0.0,
        WeightBranch::Gaussian { c } => c,
    };
    let base = space.base_point();
    let moment_term: f64 = c
        * (0..rule.len())
            .map(|i| mu[i] * space.distance(rule.point(i), base).powi(2))
            .sum::<f64>();
    let log_z = weighted.normalizer().ln();
    let residual = ent_reference - (ent_weighted - moment_term - log_z);
    Ok(EntropyIdentity {
        ent_reference,
        ent_weighted,
        moment_term,
        log_z,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atoms_against_uniform() {
        assert!((relative_entropy(&[1.0, 0.0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn gaussian_against_lebesgue() {
        let sigma: f64 = 0.7;
        let n = 20_000;
        let (lo, hi) = (-12.0 * sigma, 12.0 * sigma);
        let h = (hi - lo) / n as f64;
        let coords: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
        let rule = Quadrature::from_parts(1, coords, vec![h; n]);
        let density = |x: &[f64]| {
            (-x[0] * x[0] / (2.0 * sigma * sigma)).exp()
                / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt()
        };
        let ent = relative_entropy_density(&rule, density);
        let exact = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln();
        assert!((ent - exact).abs() < 1e-9, "{ent} vs {exact}");
    }
}
