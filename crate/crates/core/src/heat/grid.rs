use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::kernel::{circle_kernel, Repr, SpectralKernel};
use crate::error::check_time;
use crate::spaces::{PmmSpace, Quadrature};
use crate::{Error, Result};

/// Default nodes per axis for grids on continuous spaces.
pub const DEFAULT_RESOLUTION: usize = 2048;

/// The heat semigroup acting on functions sampled at quadrature nodes.
///
/// `apply(t, v)` returns `(P_t v)(x_i) ≈ Σ_j p(t, x_i, x_j) v_j w_j` at every
/// node, using FFT convolution on periodic and Neumann grids, the transition
/// matrix on finite spaces, and a dense kernel matrix on windowed grids of
/// unbounded spaces. `evaluate` does the same at an arbitrary point.
#[derive(Clone, Debug)]
pub struct HeatGrid {
    kernel: SpectralKernel,
    rule: Arc<Quadrature>,
    layout: Layout,
}

#[derive(Clone, Debug)]
enum Layout {
    Periodic {
        l: f64,
        n: usize,
    },
    Torus {
        l1: f64,
        l2: f64,
        n1: usize,
        n2: usize,
    },
    Neumann {
        len: f64,
        n: usize,
    },
    Dense,
    Atoms,
}

impl HeatGrid {
    /// Grid with `resolution` nodes per axis (window nodes on unbounded
    /// spaces; atoms or cells on finite ones).
    pub fn new(kernel: &SpectralKernel, resolution: usize) -> Result<Self> {
        Self::with_shape(kernel, &[resolution, resolution])
    }

    /// `shape[k]` nodes along axis `k` (only tori use the second entry).
    pub fn with_shape(kernel: &SpectralKernel, shape: &[usize]) -> Result<Self> {
        let space = kernel.space();
        let scale = space.mass_scale();
        let n = shape.first().copied().unwrap_or(DEFAULT_RESOLUTION).max(2);
        let (rule, layout) = match kernel.repr() {
            Repr::Circle { circumference } => (
                Quadrature::for_space(space, n)?,
                Layout::Periodic {
                    l: *circumference,
                    n,
                },
            ),
            Repr::Torus { first, second } => {
                let n2 = shape.get(1).copied().unwrap_or(n).max(2);
                let (h1, h2) = (first / n as f64, second / n2 as f64);
                let mut coords = Vec::with_capacity(2 * n * n2);
                for i in 0..n {
                    for j in 0..n2 {
                        coords.push(i as f64 * h1);
                        coords.push(j as f64 * h2);
                    }
                }
                let rule = Quadrature::from_parts(2, coords, vec![scale * h1 * h2; n * n2]);
                (
                    rule,
                    Layout::Torus {
                        l1: *first,
                        l2: *second,
                        n1: n,
                        n2,
                    },
                )
            }
            Repr::Neumann { a, b } => {
                let h = (b - a) / n as f64;
                let rule = Quadrature::from_parts(
                    1,
                    (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
                    vec![scale * h; n],
                );
                (rule, Layout::Neumann { len: b - a, n })
            }
            Repr::HalfLine { edge } => {
                let reach = 12.0 + (space.base_point()[0] - edge).abs();
                let (lo, hi) = if space.base_point()[0] >= *edge {
                    (*edge, edge + reach)
                } else {
                    (edge - reach, *edge)
                };
                let h = (hi - lo) / n as f64;
                let rule = Quadrature::from_parts(
                    1,
                    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect(),
                    vec![scale * h; n],
                );
                (rule, Layout::Dense)
            }
            Repr::Gaussian { dim } | Repr::Ou { dim, .. } => {
                if *dim > 2 {
                    return Err(Error::Unsupported(format!("heat grid in dimension {dim}")));
                }
                let half = match kernel.repr() {
                    Repr::Ou { stiffness, .. } => 10.0 / stiffness.sqrt(),
                    _ => 12.0,
                };
                let center = space.base_point().to_vec();
                let reach = center.iter().map(|c| c.abs()).fold(0.0, f64::max);
                (
                    Quadrature::window(space, &vec![0.0; *dim], half + reach, n)?,
                    Layout::Dense,
                )
            }
            Repr::Finite(_) => (Quadrature::for_space(space, 0)?, Layout::Atoms),
            Repr::Cells(c) => {
                let rule = Quadrature::from_parts(
                    1,
                    (0..c.len()).map(|j| c.midpoint(j)).collect(),
                    c.masses.iter().map(|m| m * scale).collect(),
                );
                (rule, Layout::Atoms)
            }
        };
        Ok(HeatGrid {
            kernel: kernel.clone(),
            rule: Arc::new(rule),
            layout,
        })
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn space(&self) -> &PmmSpace {
        self.kernel.space()
    }

    pub fn nodes(&self) -> &Quadrature {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    /// Samples `f` at the nodes.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.rule.values(f)
    }

    /// `P_t v` at the nodes; `t = 0` is the identity.
    pub fn apply(&self, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        if t == 0.0 {
            return Ok(v.to_vec());
        }
        check_time(t)?;
        Ok(match &self.layout {
            Layout::Periodic { l, n } => {
                let h = l / *n as f64;
                let k: Vec<f64> = (0..*n)
                    .map(|j| circle_kernel(*l, t, j as f64 * h) * h)
                    .collect();
                circular_convolve(&k, v)
            }
            Layout::Torus { l1, l2, n1, n2 } => {
                let (h1, h2) = (l1 / *n1 as f64, l2 / *n2 as f64);
                let k1: Vec<f64> = (0..*n1)
                    .map(|j| circle_kernel(*l1, t, j as f64 * h1) * h1)
                    .collect();
                let k2: Vec<f64> = (0..*n2)
                    .map(|j| circle_kernel(*l2, t, j as f64 * h2) * h2)
                    .collect();
                let mut out = v.to_vec();
                for i in 0..*n1 {
                    let row = circular_convolve(&k2, &out[i * n2..(i + 1) * n2]);
                    out[i * n2..(i + 1) * n2].copy_from_slice(&row);
                }
                for j in 0..*n2 {
                    let col: Vec<f64> = (0..*n1).map(|i| out[i * n2 + j]).collect();
                    for (i, c) in circular_convolve(&k1, &col).into_iter().enumerate() {
                        out[i * n2 + j] = c;
                    }
                }
                out
            }
            Layout::Neumann { len, n, .. } => {
                // even extension to a circle of circumference 2·len
                let h = len / *n as f64;
                let m = 2 * n;
                let k: Vec<f64> = (0..m)
                    .map(|j| circle_kernel(2.0 * len, t, j as f64 * h) * h)
                    .collect();
                let ext: Vec<f64> = v.iter().copied().chain(v.iter().rev().copied()).collect();
                circular_convolve(&k, &ext)[..*n].to_vec()
            }
            Layout::Dense => {
                let n = self.len();
                (0..n)
                    .map(|i| {
                        let x = self.rule.point(i);
                        (0..n)
                            .map(|j| {
                                self.kernel.density_unchecked(t, x, self.rule.point(j))
                                    * self.rule.weights()[j]
                                    * v[j]
                            })
                            .sum()
                    })
                    .collect()
            }
            Layout::Atoms => {
                let s = self
                    .kernel
                    .finite_semigroup()
                    .expect("atom layout has a matrix semigroup");
                s.apply(t, v)
            }
        })
    }

    /// `p(t, x, x_j) w_j` for every node: the discretized transition law.
    pub fn transition_row(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_time(t)?;
        self.space().check_point(x)?;
        Ok(match &self.layout {
            Layout::Torus { l1, l2, n1, n2 } => {
                let (h1, h2) = (l1 / *n1 as f64, l2 / *n2 as f64);
                let a: Vec<f64> = (0..*n1)
                    .map(|i| circle_kernel(*l1, t, x[0] - i as f64 * h1) * h1)
                    .collect();
                let b: Vec<f64> = (0..*n2)
                    .map(|j| circle_kernel(*l2, t, x[1] - j as f64 * h2) * h2)
                    .collect();
                a.iter()
                    .flat_map(|ai| b.iter().map(move |bj| ai * bj))
                    .collect()
            }
            Layout::Atoms => {
                let s = self
                    .kernel
                    .finite_semigroup()
                    .expect("atom layout has a matrix semigroup");
                let i = match self.kernel.repr() {
                    Repr::Cells(c) => c.cell(x[0]),
                    _ => x[0] as usize,
                };
                s.matrix(t)[i * s.len()..(i + 1) * s.len()].to_vec()
            }
            _ => (0..self.len())
                .map(|j| {
                    self.kernel.density_unchecked(t, x, self.rule.point(j)) * self.rule.weights()[j]
                })
                .collect(),
        })
    }

    /// `p(t, x, x_j)` for every node.
    pub fn kernel_row(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.transition_row(t, x)?;
        Ok(row
            .iter()
            .zip(self.rule.weights())
            .map(|(p, w)| p / w)
            .collect())
    }

    /// `(P_t v)(x)` for a node vector `v` and an arbitrary point `x`.
    pub fn evaluate(&self, t: f64, v: &[f64], x: &[f64]) -> Result<f64> {
        if v.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .transition_row(t, x)?
            .iter()
            .zip(v)
            .map(|(p, f)| p * f)
            .sum())
    }

    /// `P_t f (x)` for a function `f`.
    pub fn apply_fn<F: Fn(&[f64]) -> f64>(&self, t: f64, f: F, x: &[f64]) -> Result<f64> {
        if t == 0.0 {
            self.space().check_point(x)?;
            return Ok(f(x));
        }
        self.evaluate(t, &self.sample(f), x)
    }

    /// The nested operator `P_{t₁}(f₁ P_{t₂−t₁}(f₂ ⋯ P_{t_k−t_{k−1}} f_k))` as
    /// node values of its innermost-to-outermost stages; returns the vector
    /// `g₁` such that the operator at `x` equals `(P_{t₁} g₁)(x)`.
    pub fn fdd_stage(&self, times: &[f64], fs: &[&dyn Fn(&[f64]) -> f64]) -> Result<Vec<f64>> {
        if times.is_empty() || times.len() != fs.len() {
            return Err(Error::InvalidArgument("need one function per time".into()));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "times must be nonnegative and increasing: {times:?}"
            )));
        }
        let k = times.len();
        let mut g = self.sample(fs[k - 1]);
        for i in (0..k - 1).rev() {
            let propagated = self.apply(times[i + 1] - times[i], &g)?;
            let fi = self.sample(fs[i]);
            g = propagated.iter().zip(&fi).map(|(a, b)| a * b).collect();
        }
        Ok(g)
    }

    /// `𝒫_k(x)` for the given times and functions.
    pub fn fdd_operator(
        &self,
        times: &[f64],
        fs: &[&dyn Fn(&[f64]) -> f64],
        x: &[f64],
    ) -> Result<f64> {
        let g = self.fdd_stage(times, fs)?;
        if times[0] > 0.0 {
            return self.evaluate(times[0], &g, x);
        }
        // t₁ = 0: f₁(x) times the operator for the remaining times
        self.space().check_point(x)?;
        if times.len() == 1 {
            return Ok(fs[0](x));
        }
        Ok(fs[0](x) * self.fdd_operator(&times[1..], &fs[1..], x)?)
    }
}

/// Circular convolution `out_i = Σ_j k_{(i−j) mod n} v_j` by FFT.
pub(crate) fn circular_convolve(k: &[f64], v: &[f64]) -> Vec<f64> {
    let n = k.len();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = k.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut b: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    forward.process(&mut a);
    forward.process(&mut b);
    let mut c: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    inverse.process(&mut c);
    c.iter().map(|z| z.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn convolution_matches_direct_sum() {
        let k = [0.5, 0.25, 0.0, 0.25];
        let v = [1.0, 2.0, 3.0, 4.0];
        let out = circular_convolve(&k, &v);
        for i in 0..4 {
            let direct: f64 = (0..4).map(|j| k[(i + 4 - j) % 4] * v[j]).sum();
            assert!((out[i] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_eigenfunction_decays_exactly() {
        let k = SpectralKernel::new(&PmmSpace::circle(2.0 * PI).unwrap()).unwrap();
        let g = HeatGrid::new(&k, 256).unwrap();
        let v = g.sample(|x| (3.0 * x[0]).cos());
        let out = g.apply(0.2, &v).unwrap();
        for (i, o) in out.iter().enumerate() {
            assert!((o - (-1.8f64).exp() * v[i]).abs() < 1e-13);
        }
        let at = g.evaluate(0.2, &v, &[0.77]).unwrap();
        assert!((at - (-1.8f64).exp() * (3.0 * 0.77f64).cos()).abs() < 1e-13);
    }

    #[test]
    fn neumann_cosines_are_eigenfunctions() {
        let k = SpectralKernel::new(&PmmSpace::interval(0.0, 1.0).unwrap()).unwrap();
        let g = HeatGrid::new(&k, 512).unwrap();
        let v = g.sample(|x| (2.0 * PI * x[0]).cos());
        let out = g.apply(0.03, &v).unwrap();
        let decay = (-(2.0 * PI).powi(2) * 0.03).exp();
        for (o, vi) in out.iter().zip(&v) {
            assert!((o - decay * vi).abs() < 1e-12);
        }
    }

    #[test]
    fn fdd_with_ones_is_one() {
        let k = SpectralKernel::new(&PmmSpace::torus(2.0 * PI, PI).unwrap()).unwrap();
        let g = HeatGrid::with_shape(&k, &[64, 32]).unwrap();
        let one = |_: &[f64]| 1.0;
        let v = g
            .fdd_operator(&[0.1, 0.4, 0.5], &[&one, &one, &one], &[0.3, 0.2])
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let bad = g.fdd_operator(&[0.4, 0.1], &[&one, &one], &[0.0, 0.0]);
        assert!(matches!(bad, Err(Error::InvalidArgument(_))));
    }
}
