use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::spaces::FiniteMms;

/// Heat semigroup `e^{tL}` of a reversible Markov generator on finitely many
/// atoms, `(Lf)_i = (1/m_i) Σ_j w_ij (f_j − f_i)`.
///
/// The generator is conjugated to the symmetric matrix
/// `S = M^{1/2} L M^{−1/2}` and diagonalized once, so every `e^{tL}` is
/// `M^{−1/2} U e^{tΛ} Uᵀ M^{1/2}` and satisfies detailed balance by
/// construction. Transition matrices are cached per `t`.
#[derive(Debug)]
pub struct FiniteSemigroup {
    n: usize,
    weights: Vec<f64>,
    conductance: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    components: usize,
    cache: RwLock<HashMap<u64, (Arc<Vec<f64>>, f64)>>,
}

impl FiniteSemigroup {
    pub fn new(space: &FiniteMms) -> Self {
        Self::from_parts(
            space.weights().to_vec(),
            space.conductances(),
            space.components(),
        )
    }

    pub(crate) fn from_parts(
        weights: Vec<f64>,
        conductance: Vec<f64>,
        components: Vec<usize>,
    ) -> Self {
        let n = weights.len();
        let sqrt_m: Vec<f64> = weights.iter().map(|m| m.sqrt()).collect();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut out = 0.0;
            for j in 0..n {
                if i != j {
                    let w = conductance[i * n + j];
                    out += w;
                    s[(i, j)] = w / (sqrt_m[i] * sqrt_m[j]);
                }
            }
            s[(i, i)] = -out / weights[i];
        }
        let eig = SymmetricEigen::new(s);
        let count = components.iter().copied().max().map_or(0, |c| c + 1);
        FiniteSemigroup {
            n,
            weights,
            conductance,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            components: count,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Eigenvalues of `−L`, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigenvalues.iter().map(|l| (-l).max(0.0)).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    /// Row-major transition matrix `P_t = e^{tL}`, `P_t(i, j) = P^i(X_t = j)`.
    pub fn matrix(&self, t: f64) -> Arc<Vec<f64>> {
        self.entry(t).0
    }

    /// Largest negative entry clipped to zero when forming `P_t` (a
    /// round-off artifact of the eigendecomposition).
    pub fn clipped(&self, t: f64) -> f64 {
        self.entry(t).1
    }

    fn entry(&self, t: f64) -> (Arc<Vec<f64>>, f64) {
        let key = t.to_bits();
        if let Some(e) = self.cache.read().expect("cache lock").get(&key) {
            return e.clone();
        }
        let (p, clipped) = self.compute(t);
        self.cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert((Arc::new(p), clipped))
            .clone()
    }

    fn compute(&self, t: f64) -> (Vec<f64>, f64) {
        let n = self.n;
        if t == 0.0 {
            let mut id = vec![0.0; n * n];
            (0..n).for_each(|i| id[i * n + i] = 1.0);
            return (id, 0.0);
        }
        let mut scaled = self.eigenvectors.clone();
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            let e = (t * lambda).exp();
            scaled.column_mut(k).scale_mut(e);
        }
        let sym = &scaled * self.eigenvectors.transpose();
        let mut p = vec![0.0; n * n];
        let mut clipped: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = sym[(i, j)] * (self.weights[j] / self.weights[i]).sqrt();
                clipped = clipped.max(-v);
                p[i * n + j] = v.max(0.0);
            }
        }
        (p, clipped)
    }

    /// `P_t f`.
    pub fn apply(&self, t: f64, f: &[f64]) -> Vec<f64> {
        let p = self.matrix(t);
        let n = self.n;
        (0..n)
            .map(|i| {
                p[i * n..(i + 1) * n]
                    .iter()
                    .zip(f)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `L f`.
    pub fn generator_apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.conductance[i * n + j] * (f[j] - f[i]))
                    .sum::<f64>()
                    / self.weights[i]
            })
            .collect()
    }
}
