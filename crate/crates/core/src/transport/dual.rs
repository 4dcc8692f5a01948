use std::fmt;
use std::sync::Arc;

use super::exact::check_balanced;
use super::measure::DiscreteMeasure;
use crate::{Error, Result};

type Scalar = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A real function together with a declared Lipschitz constant.
#[derive(Clone)]
pub struct LipschitzFunction {
    label: String,
    lipschitz: f64,
    f: Scalar,
}

impl fmt::Debug for LipschitzFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzFunction")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl LipschitzFunction {
    pub fn new<F>(label: impl Into<String>, lipschitz: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        LipschitzFunction {
            label: label.into(),
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn negated(&self) -> Self {
        let f = Arc::clone(&self.f);
        LipschitzFunction {
            label: format!("-{}", self.label),
            lipschitz: self.lipschitz,
            f: Arc::new(move |x| -f(x)),
        }
    }
}

/// `max_f (∫f dμ − ∫f dν) / L_f` over `family`: a lower bound on `W₁(μ, ν)`
/// by Kantorovich–Rubinstein duality. It is never claimed to be tight.
pub fn kr_dual_bound(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    family: &[LipschitzFunction],
) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("Lipschitz family is empty".into()));
    }
    check_balanced(mu, nu)?;
    let mut best = f64::NEG_INFINITY;
    for g in family {
        if !(g.lipschitz > 0.0 && g.lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{}: Lipschitz constant must be positive",
                g.label
            )));
        }
        let gap = mu.integrate(|x| g.eval(x)) - nu.integrate(|x| g.eval(x));
        best = best.max(gap / g.lipschitz);
    }
    Ok(best)
}

/// 1-Lipschitz functions on the line built on probe `knots`: the identity,
/// ramps `(x − a)⁺`, and hats `(w − |x − a|)⁺` of half-width `width`, each
/// with its negation.
pub fn hat_ramp_family(knots: &[f64], width: f64) -> Vec<LipschitzFunction> {
    let mut family = vec![LipschitzFunction::new("x", 1.0, |x: &[f64]| x[0])];
    for &a in knots {
        family.push(LipschitzFunction::new(
            format!("ramp({a})"),
            1.0,
            move |x: &[f64]| (x[0] - a).max(0.0),
        ));
        if width > 0.0 {
            family.push(LipschitzFunction::new(
                format!("hat({a})"),
                1.0,
                move |x: &[f64]| (width - (x[0] - a).abs()).max(0.0),
            ));
        }
    }
    let negated: Vec<_> = family.iter().map(LipschitzFunction::negated).collect();
    family.extend(negated);
    family
}

/// Distance functions `d(·, a)` and truncations `min(d(·, a), r)` to probe
/// points, with negations; all 1-Lipschitz for the metric `metric`.
pub fn distance_family<D>(metric: D, probes: &[Vec<f64>], radii: &[f64]) -> Vec<LipschitzFunction>
where
    D: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
{
    let metric = Arc::new(metric);
    let mut family = Vec::new();
    for (k, a) in probes.iter().enumerate() {
        let (m, a0) = (Arc::clone(&metric), a.clone());
        family.push(LipschitzFunction::new(
            format!("d(.,p{k})"),
            1.0,
            move |x: &[f64]| m(x, &a0),
        ));
        for &r in radii {
            let (m, a0) = (Arc::clone(&metric), a.clone());
            family.push(LipschitzFunction::new(
                format!("min(d(.,p{k}),{r})"),
                1.0,
                move |x: &[f64]| m(x, &a0).min(r),
            ));
        }
    }
    let negated: Vec<_> = family.iter().map(LipschitzFunction::negated).collect();
    family.extend(negated);
    family
}
