//! Heat semigroups and heat kernels.
//!
//! The generator is `Δ − ∇V·∇`; on the circle of length `2π` the kernel is
//! `p(t,x,y) = (1/2π) Σ_k e^{−k²t} cos(k(x−y))` with respect to arc length.
//! Densities are always taken with respect to the space's reference measure
//! (including its normalization), so `∫ p(t,x,y) dm(y) = 1`.

mod checks;
mod entropy;
mod finite;
mod grid;
mod kernel;

pub use checks::{
    feller_check, gaussian_bound_check, kernel_algebra_check, kernel_ball_sup, mixing_bound_check,
    DiagonalBound, FellerReport, FellerRow, GaussianBoundReport, GaussianConstants, GaussianRow,
    KernelAlgebraReport, KernelMixingRow, MixingReport, MixingRow,
};
pub use entropy::{
    relative_entropy, relative_entropy_density, weighted_entropy_identity, EntropyIdentity,
};
pub use finite::FiniteSemigroup;
pub use grid::{HeatGrid, DEFAULT_RESOLUTION};
pub use kernel::{
    circle_kernel, fold, gaussian_kernel, neumann_kernel, ou_kernel, ou_moments, HeatKernelValue,
    SpectralGap, SpectralKernel, CIRCLE_NODES, CLIP_THRESHOLD, DEFAULT_CELLS,
};

use crate::spaces::PmmSpace;
use crate::Result;

/// `p(t, x, y)` on `space`.
pub fn heat_kernel(space: &PmmSpace, t: f64, x: &[f64], y: &[f64]) -> Result<HeatKernelValue> {
    SpectralKernel::new(space)?.heat_kernel(t, x, y)
}

/// `P_t f (x)` by quadrature on the default grid of `space`.
pub fn semigroup_apply<F: Fn(&[f64]) -> f64>(
    space: &PmmSpace,
    t: f64,
    f: F,
    x: &[f64],
) -> Result<f64> {
    let kernel = SpectralKernel::new(space)?;
    let resolution = if space.chart_dim() == 2 {
        512
    } else {
        DEFAULT_RESOLUTION
    };
    HeatGrid::new(&kernel, resolution)?.apply_fn(t, f, x)
}

/// `p(t, x, x)` as `‖p(t/2, x, ·)‖²_{L²(m)}`.
pub fn on_diagonal(space: &PmmSpace, t: f64, x: &[f64]) -> Result<f64> {
    SpectralKernel::new(space)?.on_diagonal(t, x)
}

pub fn spectral_gap(space: &PmmSpace) -> Result<SpectralGap> {
    SpectralKernel::new(space)?.spectral_gap()
}
