use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::{Error, Result};

/// Absolute tolerance for the triangle inequality and metric symmetry.
pub const METRIC_TOL: f64 = 1e-9;

/// Finite metric measure space: `n` atoms with a distance matrix and positive
/// atom masses. Optionally carries explicit edge conductances (otherwise an
/// ε-neighbourhood graph is used, see [`FiniteMms::conductances`]) and
/// embedding coordinates used by collapse maps.
#[derive(Clone, Debug)]
pub struct FiniteMms {
    n: usize,
    dist: Vec<f64>,
    weights: Vec<f64>,
    base_index: usize,
    conductance: Option<Vec<f64>>,
    coords: Option<(usize, Vec<f64>)>,
    intrinsic_dim: usize,
}

impl FiniteMms {
    /// Builds and fully validates a finite space from a row-major distance matrix.
    pub fn new(dist: Vec<f64>, weights: Vec<f64>, base_index: usize) -> Result<Self> {
        let space = Self::unchecked(dist, weights, base_index)?;
        space.validate()?;
        Ok(space)
    }

    /// Shape and positivity checks only; the metric axioms are left to the
    /// caller (used for shortest-path metrics, which satisfy them by construction).
    pub(crate) fn unchecked(dist: Vec<f64>, weights: Vec<f64>, base_index: usize) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "finite space needs at least one atom".into(),
            ));
        }
        if dist.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "distance matrix must be {n}x{n}"
            )));
        }
        if base_index >= n {
            return Err(Error::InvalidArgument(format!(
                "base index {base_index} out of range"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "atom weights must be positive, got {w}"
            )));
        }
        Ok(FiniteMms {
            n,
            dist,
            weights,
            base_index,
            conductance: None,
            coords: None,
            intrinsic_dim: 1,
        })
    }

    /// Euclidean distances between the given points.
    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>, base_index: usize) -> Result<Self> {
        let n = points.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = euclid(&points[i], &points[j]);
            }
        }
        let dim = points.first().map_or(1, |p| p.len());
        let coords = points.iter().flatten().copied().collect();
        let mut space = Self::new(dist, weights, base_index)?;
        space.coords = Some((dim, coords));
        space.intrinsic_dim = dim;
        Ok(space)
    }

    /// Two-state chain jumping `0 → 1` at rate `a` and `1 → 0` at rate `b`.
    /// Detailed balance fixes the atom masses to `(b, a) / (a + b)`.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument("rates must be positive".into()));
        }
        let s = a + b;
        let space = Self::new(vec![0.0, 1.0, 1.0, 0.0], vec![b / s, a / s], 0)?;
        let c = a * b / s;
        space.with_conductance(vec![0.0, c, c, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.dist[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("dist[{i}][{i}] must be 0")));
            }
            for j in 0..n {
                let d = self.dist[i * n + j];
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "dist[{i}][{j}] = {d} is not a distance"
                    )));
                }
                if (d - self.dist[j * n + i]).abs() > METRIC_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "distance matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let worst = self.triangle_violation();
        if worst > METRIC_TOL {
            return Err(Error::InvalidArgument(format!(
                "triangle inequality violated by {worst:e}"
            )));
        }
        Ok(())
    }

    /// Largest `d(i,k) - d(i,j) - d(j,k)` over all triples (0 for a metric).
    pub fn triangle_violation(&self) -> f64 {
        let n = self.n;
        let d = &self.dist;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut worst: f64 = 0.0;
                for j in 0..n {
                    let dij = d[i * n + j];
                    for k in 0..n {
                        worst = worst.max(d[i * n + k] - dij - d[j * n + k]);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Explicit symmetric conductance matrix (row-major, zero diagonal).
    pub fn with_conductance(mut self, conductance: Vec<f64>) -> Result<Self> {
        let n = self.n;
        if conductance.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "conductance matrix must be {n}x{n}"
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let c = conductance[i * n + j];
                if !(c >= 0.0)
                    || (i == j && c != 0.0)
                    || (c - conductance[j * n + i]).abs() > 1e-12 * c.abs().max(1.0)
                {
                    return Err(Error::InvalidArgument(format!(
                        "invalid conductance at ({i},{j})"
                    )));
                }
            }
        }
        self.conductance = Some(conductance);
        Ok(self)
    }

    pub fn with_coords(mut self, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != dim * self.n {
            return Err(Error::InvalidArgument(
                "coordinate array has the wrong length".into(),
            ));
        }
        self.coords = Some((dim, coords));
        Ok(self)
    }

    pub fn with_intrinsic_dim(mut self, dim: usize) -> Self {
        self.intrinsic_dim = dim.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    /// Embedding coordinates of atom `i`, if any were attached.
    pub fn coord(&self, i: usize) -> Option<&[f64]> {
        self.coords.as_ref().map(|(d, c)| &c[i * d..(i + 1) * d])
    }

    pub fn has_explicit_conductance(&self) -> bool {
        self.conductance.is_some()
    }

    /// Symmetric edge conductances `w_ij`; the generator is
    /// `(Lf)_i = (1/m_i) Σ_j w_ij (f_j − f_i)`.
    ///
    /// Without explicit conductances this is the ε-neighbourhood graph
    /// `w_ij = m_i m_j exp(−d_ij²/ε²)` for `d_ij ≤ ε`, with ε twice the median
    /// nearest-neighbour distance. The overall scale is calibrated so that the
    /// generator applied to `d²(·, x_i)` at `x_i` gives `2·dim` at the median
    /// atom, as the Laplacian does.
    pub fn conductances(&self) -> Vec<f64> {
        if let Some(c) = &self.conductance {
            return c.clone();
        }
        let n = self.n;
        let mut w = vec![0.0; n * n];
        if n < 2 {
            return w;
        }
        let eps = self.default_epsilon();
        for i in 0..n {
            for j in 0..n {
                let d = self.dist(i, j);
                if i != j && d <= eps {
                    w[i * n + j] =
                        self.weights[i] * self.weights[j] * (-(d * d) / (eps * eps)).exp();
                }
            }
        }
        let mut spread: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| w[i * n + j] * self.dist(i, j).powi(2))
                    .sum::<f64>()
                    / self.weights[i]
            })
            .filter(|s| *s > 0.0)
            .collect();
        if spread.is_empty() {
            return w;
        }
        let scale = 2.0 * self.intrinsic_dim as f64 / median(&mut spread);
        w.iter_mut().for_each(|v| *v *= scale);
        w
    }

    /// Twice the median nearest-neighbour distance.
    pub fn default_epsilon(&self) -> f64 {
        let n = self.n;
        let mut nn: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.dist(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        2.0 * median(&mut nn)
    }

    /// Connected components of the conductance graph (component id per atom).
    pub fn components(&self) -> Vec<usize> {
        let n = self.n;
        let w = self.conductances();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if w[i * n + j] > 0.0 && comp[j] == usize::MAX {
                        comp[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Flat text format: `n base_index`, then `n` weight lines, then `n` rows of distances.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.n, self.base_index)?;
        for w in &self.weights {
            writeln!(out, "{w:e}")?;
        }
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| format!("{:e}", self.dist(i, j)))
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in input.lines() {
            tokens.extend(line?.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))
        };
        let n: usize = next("n")?
            .parse()
            .map_err(|e| Error::Parse(format!("n: {e}")))?;
        let base: usize = next("base_index")?
            .parse()
            .map_err(|e| Error::Parse(format!("base_index: {e}")))?;
        let mut parse = |what: &str| -> Result<f64> {
            next(what)?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{what}: {e}")))
        };
        let weights = (0..n)
            .map(|_| parse("weight"))
            .collect::<Result<Vec<_>>>()?;
        let dist = (0..n * n)
            .map(|_| parse("distance"))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dist, weights, base)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
