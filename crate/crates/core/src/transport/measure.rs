use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Atoms closer than this (in every coordinate) are merged.
pub const MERGE_RADIUS: f64 = 1e-12;

/// A finitely supported probability measure on a chart of dimension `dim`.
///
/// Atoms are stored flat; construction drops zero weights, merges atoms
/// closer than [`MERGE_RADIUS`] (keeping first-appearance order) and
/// requires the weights to sum to one within `1e-12`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total = Self::validate(dim, &atoms, &weights)?;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self::merged(dim, &atoms, &weights))
    }

    /// Like [`DiscreteMeasure::new`] but rescales the weights to total one.
    pub fn normalized(dim: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total = Self::validate(dim, &atoms, &weights)?;
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Ok(Self::merged(dim, &atoms, &weights))
    }

    /// The empirical measure of `points`.
    pub fn uniform(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::normalized(dim, points, vec![1.0; n])
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        DiscreteMeasure {
            dim: point.len(),
            atoms: point,
            weights: vec![1.0],
        }
    }

    fn validate(dim: usize, atoms: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "atom and weight counts differ".into(),
            ));
        }
        for atom in atoms {
            if atom.len() != dim || atom.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad atom {atom:?}")));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("measure has no mass".into()));
        }
        Ok(total)
    }

    fn merged(dim: usize, atoms: &[Vec<f64>], weights: &[f64]) -> Self {
        let n = atoms.len();
        let mut order: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
        order.sort_by(|&i, &j| atoms[i][0].total_cmp(&atoms[j][0]).then(i.cmp(&j)));
        let mut representative: Vec<usize> = (0..n).collect();
        for (k, &i) in order.iter().enumerate() {
            if representative[i] != i {
                continue;
            }
            for &j in &order[k + 1..] {
                if atoms[j][0] - atoms[i][0] > MERGE_RADIUS {
                    break;
                }
                if representative[j] == j
                    && atoms[i]
                        .iter()
                        .zip(&atoms[j])
                        .all(|(a, b)| (a - b).abs() <= MERGE_RADIUS)
                {
                    representative[j] = i;
                }
            }
        }
        // the representative is the lowest index in its class so that
        // first-appearance order survives
        let mut lowest: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let r = representative[i];
            lowest[r] = lowest[r].min(i);
        }
        let mut slot = vec![usize::MAX; n];
        let mut flat = Vec::new();
        let mut merged_weights: Vec<f64> = Vec::new();
        for i in 0..n {
            if weights[i] <= 0.0 {
                continue;
            }
            let class = representative[i];
            if slot[class] == usize::MAX {
                slot[class] = merged_weights.len();
                flat.extend_from_slice(&atoms[lowest[class]]);
                merged_weights.push(0.0);
            }
            merged_weights[slot[class]] += weights[i];
        }
        DiscreteMeasure {
            dim,
            atoms: flat,
            weights: merged_weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.chunks(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f dμ`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.atoms().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    /// Push-forward under `map` (atoms that collide are merged).
    pub fn push_forward<F: Fn(&[f64]) -> Vec<f64>>(&self, dim: usize, map: F) -> Result<Self> {
        let atoms: Vec<Vec<f64>> = self.atoms().map(map).collect();
        Self::normalized(dim, atoms, self.weights.clone())
    }

    /// Whitespace rows `weight x₁ … x_d`, one per atom.
    pub fn to_rows(&self) -> String {
        let mut out = String::new();
        for (x, w) in self.atoms().zip(&self.weights) {
            write!(out, "{w:e}").unwrap();
            for c in x {
                write!(out, " {c:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`DiscreteMeasure::to_rows`] output; blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_rows(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
                })
                .collect::<Result<_>>()?;
            if values.len() < 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected weight and coordinates",
                    line_no + 1
                )));
            }
            weights.push(values[0]);
            atoms.push(values[1..].to_vec());
        }
        let dim = atoms.first().map_or(0, Vec::len);
        Self::new(dim, atoms, weights)
    }
}

/// A coupling stored sparsely as `(i, j, mass)` triples.
#[derive(Clone, Debug, Serialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
    /// Optimality certificate from the flow solver: the most negative
    /// reduced cost (0 when dual feasible) and `primal − dual`.
    pub dual_violation: f64,
    pub duality_gap: f64,
}

impl TransportPlan {
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.cols]; self.rows];
        for &(i, j, m) in &self.entries {
            q[i][j] += m;
        }
        q
    }

    /// Largest deviation of the plan's marginals from the weights of `mu`
    /// and `nu`.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut rows = mu.weights().to_vec();
        let mut cols = nu.weights().to_vec();
        for &(i, j, m) in &self.entries {
            rows[i] -= m;
            cols[j] -= m;
        }
        rows.iter()
            .chain(&cols)
            .fold(0.0, |acc, r| acc.max(r.abs()))
    }

    /// `Σ q_ij c(x_i, y_j)`.
    pub fn cost<C: Fn(&[f64], &[f64]) -> f64>(
        &self,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        c: C,
    ) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, m)| m * c(mu.atom(i), nu.atom(j)))
            .sum()
    }
}
