use serde::Serialize;

use super::grid::HeatGrid;
use super::kernel::{SpectralGap, SpectralKernel};
use crate::error::check_time;
use crate::numeric::linear_fit;
use crate::report::CheckRecord;
use crate::{Error, Result};

fn l2_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>().sqrt()
}

/// Worst residuals of the kernel identities over a set of probe pairs.
#[derive(Clone, Debug, Serialize)]
pub struct KernelAlgebraReport {
    /// `max |p(t,x,y) − p(t,y,x)|`.
    pub symmetry: f64,
    /// `max |∫ p(s,x,z) p(t,z,y) dm(z) − p(s+t,x,y)| / max(1, p(s+t,x,y))`.
    pub chapman_kolmogorov: f64,
    /// `max |∫ p(t,x,y) dm(y) − 1|`.
    pub conservativeness: f64,
    /// `p(t,x,x)` (as `‖p(t/2,x,·)‖²`) is non-increasing along the time grid.
    pub diagonal_monotone: bool,
}

impl KernelAlgebraReport {
    pub fn records(&self, ck_tolerance: f64) -> Vec<CheckRecord> {
        vec![
            CheckRecord::new("symmetry", None, self.symmetry, self.symmetry <= 1e-10),
            CheckRecord::new(
                "chapman_kolmogorov",
                None,
                self.chapman_kolmogorov,
                self.chapman_kolmogorov <= ck_tolerance,
            ),
            CheckRecord::new(
                "conservativeness",
                None,
                self.conservativeness,
                self.conservativeness <= 1e-9,
            ),
            CheckRecord::new("on_diagonal_monotone", None, 0.0, self.diagonal_monotone),
        ]
    }
}

/// Evaluates symmetry, Chapman–Kolmogorov (grid quadrature, exact matrix
/// products on finite spaces) and conservativeness for every time pair of
/// `times` and every probe pair, plus monotonicity of the on-diagonal value
/// along `diagonal_times` at each probe's first point.
pub fn kernel_algebra_check(
    grid: &HeatGrid,
    times: &[f64],
    diagonal_times: &[f64],
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<KernelAlgebraReport> {
    let kernel = grid.kernel();
    let weights = grid.nodes().weights();
    let mut report = KernelAlgebraReport {
        symmetry: 0.0,
        chapman_kolmogorov: 0.0,
        conservativeness: 0.0,
        diagonal_monotone: true,
    };
    for (x, y) in probes {
        for &t in times {
            let pxy = kernel.density(t, x, y)?;
            let pyx = kernel.density(t, y, x)?;
            report.symmetry = report.symmetry.max((pxy - pyx).abs());
            let mass: f64 = grid.transition_row(t, x)?.iter().sum();
            report.conservativeness = report.conservativeness.max((mass - 1.0).abs());
        }
        let rights: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| grid.kernel_row(t, y))
            .collect::<Result<_>>()?;
        for &s in times {
            let left = grid.kernel_row(s, x)?;
            for (&t, right) in times.iter().zip(&rights) {
                let composed: f64 = left
                    .iter()
                    .zip(right)
                    .zip(weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                let direct = kernel.density(s + t, x, y)?;
                let residual = (composed - direct).abs() / direct.abs().max(1.0);
                report.chapman_kolmogorov = report.chapman_kolmogorov.max(residual);
            }
        }
        let mut sorted = diagonal_times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let diag: Vec<f64> = sorted
            .iter()
            .map(|&t| kernel.on_diagonal(t, x))
            .collect::<Result<_>>()?;
        if diag.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            report.diagonal_monotone = false;
        }
    }
    Ok(report)
}

/// Assumed on-diagonal bound `p(t*, x̄, x̄) < M`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiagonalBound {
    pub t_star: f64,
    pub m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingRow {
    pub t: f64,
    pub trial: usize,
    /// `‖P_t f − m̃(f)‖₂`.
    pub lhs: f64,
    /// `e^{−λ₁t} ‖f − m̃(f)‖₂`.
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelMixingRow {
    pub t: f64,
    /// `‖p(t, x̄, ·) − 1/m(X)‖_{L²(m)}`.
    pub lhs: f64,
    /// `e^{−λ₁(t−ε)} p(2ε, x̄, x̄)^{1/2}` with `ε = t*`.
    pub chain: f64,
    /// `M^{1/2} e^{−λ₁(t−ε)}`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub gap: SpectralGap,
    pub rows: Vec<MixingRow>,
    pub kernel_rows: Vec<KernelMixingRow>,
    pub max_violation: f64,
    pub pass: bool,
}

impl MixingReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        vec![CheckRecord::new(
            "mixing_bound",
            None,
            self.max_violation,
            self.pass,
        )]
    }
}

/// Checks `‖P_t f − m̃(f)‖₂ ≤ e^{−λ₁t}‖f − m̃(f)‖₂` in `L²(m̃)` for each trial
/// vector (node values) and time. With a diagonal bound, also evaluates the
/// kernel-level decay `‖p(t,x̄,·) − 1/m(X)‖ ≤ M^{1/2} e^{−λ₁(t−t*)}` at the
/// base point for the times beyond `t*`.
pub fn mixing_bound_check(
    grid: &HeatGrid,
    times: &[f64],
    trials: &[Vec<f64>],
    diagonal_bound: Option<DiagonalBound>,
) -> Result<MixingReport> {
    let gap = grid.kernel().spectral_gap()?;
    let total: f64 = grid.nodes().weights().iter().sum();
    let w: Vec<f64> = grid.nodes().weights().iter().map(|v| v / total).collect();
    let mut rows = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for (k, f) in trials.iter().enumerate() {
        let mean: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
        let base = l2_norm(&centered, &w);
        for &t in times {
            let pf = grid.apply(t, f)?;
            let dev: Vec<f64> = pf.iter().map(|v| v - mean).collect();
            let lhs = l2_norm(&dev, &w);
            let rhs = (-gap.value * t).exp() * base;
            max_violation = max_violation.max(lhs - rhs * (1.0 + 1e-9) - 1e-12);
            rows.push(MixingRow {
                t,
                trial: k,
                lhs,
                rhs,
            });
        }
    }
    let mut kernel_rows = Vec::new();
    if let Some(DiagonalBound { t_star, m }) = diagonal_bound {
        let kernel = grid.kernel();
        let base = kernel.space().base_point().to_vec();
        let weights = grid.nodes().weights();
        let diag = kernel.on_diagonal(2.0 * t_star, &base)?;
        for &t in times.iter().filter(|&&t| t > t_star) {
            let p = grid.kernel_row(t, &base)?;
            let dev: Vec<f64> = p.iter().map(|v| v - 1.0 / total).collect();
            let lhs = l2_norm(&dev, weights);
            let decay = (-gap.value * (t - t_star)).exp();
            let chain = decay * diag.sqrt();
            let bound = m.sqrt() * decay;
            max_violation = max_violation
                .max(lhs - chain * (1.0 + 1e-9) - 1e-12)
                .max(chain - bound);
            kernel_rows.push(KernelMixingRow {
                t,
                lhs,
                chain,
                bound,
            });
        }
    }
    if max_violation == f64::NEG_INFINITY {
        max_violation = 0.0;
    }
    Ok(MixingReport {
        gap,
        rows,
        kernel_rows,
        pass: max_violation <= 0.0,
        max_violation,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FellerRow {
    pub t: f64,
    /// `sup_probes |P_t f − f|`.
    pub sup_deviation: f64,
    /// `t ‖L f‖_∞` on finite spaces.
    pub generator_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FellerReport {
    pub rows: Vec<FellerRow>,
    pub monotone: bool,
    pub tolerance: f64,
    pub pass: bool,
}

impl FellerReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        self.rows
            .iter()
            .map(|r| {
                CheckRecord::new(
                    "feller",
                    Some(r.t),
                    r.sup_deviation - self.tolerance,
                    self.pass,
                )
            })
            .collect()
    }
}

/// `‖P_t f − f‖_∞` on the probes for a time grid decreasing to 0. Passes when
/// the deviation is non-increasing as `t ↓ 0` and ends below `tolerance`
/// (and, on finite spaces, stays below `t‖Lf‖_∞`).
pub fn feller_check<F: Fn(&[f64]) -> f64>(
    grid: &HeatGrid,
    f: F,
    times: &[f64],
    probes: &[Vec<f64>],
    tolerance: f64,
) -> Result<FellerReport> {
    if times.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("Feller times must decrease".into()));
    }
    let values = grid.sample(&f);
    let generator_norm = grid.kernel().finite_semigroup().map(|s| {
        s.generator_apply(&values)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    });
    let mut rows = Vec::new();
    for &t in times {
        let mut sup: f64 = 0.0;
        for x in probes {
            sup = sup.max((grid.evaluate(t, &values, x)? - f(x)).abs());
        }
        rows.push(FellerRow {
            t,
            sup_deviation: sup,
            generator_bound: generator_norm.map(|g| t * g),
        });
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].sup_deviation <= w[0].sup_deviation + 1e-12);
    let within_generator = rows.iter().all(|r| {
        r.generator_bound
            .is_none_or(|g| r.sup_deviation <= g + 1e-12)
    });
    let last = rows.last().map_or(0.0, |r| r.sup_deviation);
    Ok(FellerReport {
        pass: monotone && within_generator && last <= tolerance,
        rows,
        monotone,
        tolerance,
    })
}

/// Supremum of `p(t, x̄, ·)` over the open ball `B_r(x̄)`, scanning the grid
/// nodes and the centre itself.
pub fn kernel_ball_sup(grid: &HeatGrid, t: f64, center: &[f64], r: f64) -> Result<f64> {
    check_time(t)?;
    if r <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {r}"
        )));
    }
    let space = grid.space();
    let row = grid.kernel_row(t, center)?;
    let mut best = grid.kernel().density(t, center, center)?;
    for (j, p) in row.iter().enumerate() {
        if space.distance(center, grid.nodes().point(j)) < r {
            best = best.max(*p);
        }
    }
    Ok(best)
}

/// Constants of `p(t,x,y) ≤ C₁/(c t^ν) · exp(−C₂ d(x,y)²/t)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussianConstants {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianRow {
    pub t: f64,
    pub distance: f64,
    pub density: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianBoundReport {
    pub rows: Vec<GaussianRow>,
    pub max_violation: f64,
    /// Smallest `C₁` for which every probe satisfies the bound.
    pub tightest_c1: f64,
    /// `ν` and `C₁` fitted to `p(t, x̄, x̄) ≈ C₁/(c t^ν)` over the time grid.
    pub fitted_nu: Option<f64>,
    pub fitted_c1: Option<f64>,
    pub pass: bool,
}

impl GaussianBoundReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        vec![CheckRecord::new(
            "gaussian_upper_bound",
            None,
            self.max_violation,
            self.pass,
        )]
    }
}

pub fn gaussian_bound_check(
    kernel: &SpectralKernel,
    constants: GaussianConstants,
    times: &[f64],
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<GaussianBoundReport> {
    let GaussianConstants { c1, c2, c, nu } = constants;
    let space = kernel.space();
    let mut rows = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    let mut tightest: f64 = 0.0;
    for &t in times {
        check_time(t)?;
        for (x, y) in probes {
            let density = kernel.density(t, x, y)?;
            let d = space.distance(x, y);
            let shape = (-c2 * d * d / t).exp() / (c * t.powf(nu));
            let bound = c1 * shape;
            max_violation = max_violation.max(density - bound);
            tightest = tightest.max(density / shape);
            rows.push(GaussianRow {
                t,
                distance: d,
                density,
                bound,
            });
        }
    }
    let base = space.base_point().to_vec();
    let mut logs = (Vec::new(), Vec::new());
    for &t in times {
        let p = kernel.density(t, &base, &base)?;
        if p > 0.0 {
            logs.0.push(t.ln());
            logs.1.push(p.ln());
        }
    }
    let (fitted_nu, fitted_c1) = if logs.0.len() >= 2 {
        let (slope, intercept) = linear_fit(&logs.0, &logs.1);
        (Some(-slope), Some(c * intercept.exp()))
    } else {
        (None, None)
    };
    if max_violation == f64::NEG_INFINITY {
        max_violation = 0.0;
    }
    Ok(GaussianBoundReport {
        rows,
        pass: max_violation <= 0.0,
        max_violation,
        tightest_c1: tightest,
        fitted_nu,
        fitted_c1,
    })
}
