use std::fmt;
use std::sync::Arc;

use rand::Rng;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Potential `V` of a log-concave reference measure `e^{-V} dx`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `V(x) = stiffness * |x|^2 / 2`.
    Quadratic {
        stiffness: f64,
    },
    Custom {
        label: String,
        value: ScalarFn,
        gradient: VectorFn,
        /// Declared lower bound on the Hessian.
        convexity_modulus: f64,
    },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Quadratic { stiffness } => write!(f, "Quadratic({stiffness})"),
            Potential::Custom {
                label,
                convexity_modulus,
                ..
            } => {
                write!(f, "Custom({label}, K'={convexity_modulus})")
            }
        }
    }
}

impl Potential {
    pub fn quadratic(stiffness: f64) -> Self {
        Potential::Quadratic { stiffness }
    }

    pub fn custom<V, G>(
        label: impl Into<String>,
        convexity_modulus: f64,
        value: V,
        gradient: G,
    ) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Potential::Custom {
            label: label.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            convexity_modulus,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Quadratic { stiffness } => {
                0.5 * stiffness * x.iter().map(|v| v * v).sum::<f64>()
            }
            Potential::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Potential::Zero => vec![0.0; x.len()],
            Potential::Quadratic { stiffness } => x.iter().map(|v| stiffness * v).collect(),
            Potential::Custom { gradient, .. } => gradient(x),
        }
    }

    pub fn convexity_modulus(&self) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Quadratic { stiffness } => *stiffness,
            Potential::Custom {
                convexity_modulus, ..
            } => *convexity_modulus,
        }
    }

    /// Stiffness when the potential is `a|x|^2/2` (zero counts with `a = 0`).
    pub fn quadratic_stiffness(&self) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Quadratic { stiffness } => Some(*stiffness),
            Potential::Custom { .. } => None,
        }
    }

    /// Largest relative mismatch between the gradient and central differences
    /// of `V` over `probes` random points in `[-radius, radius]^dim`.
    pub fn gradient_mismatch<R: Rng>(
        &self,
        dim: usize,
        radius: f64,
        probes: usize,
        rng: &mut R,
    ) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let x: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-radius..radius))
                .collect();
            let g = self.gradient(&x);
            for k in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (self.value(&xp) - self.value(&xm)) / (2.0 * h);
                let scale = g[k].abs().max(fd.abs()).max(1.0);
                worst = worst.max((g[k] - fd).abs() / scale);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let quartic =
            Potential::custom("x^4/4", 0.0, |x| x[0].powi(4) / 4.0, |x| vec![x[0].powi(3)]);
        for v in [Potential::Zero, Potential::quadratic(1.5), quartic] {
            assert!(v.gradient_mismatch(1, 2.0, 50, &mut rng) < 1e-5, "{v:?}");
        }
        let broken = Potential::custom("bad", 0.0, |x| x[0] * x[0], |x| vec![x[0]]);
        assert!(broken.gradient_mismatch(1, 2.0, 50, &mut rng) > 1e-2);
    }
}
