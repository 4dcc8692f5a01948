//! Comparison of a family of spaces `X_n` with its limit `X_∞`.
//!
//! Measures are compared through pulled-back Lipschitz test functions
//! ([`pmg_test`]), semigroups through the nested finite-dimensional operators
//! `𝒫_k` ([`fdd_convergence_report`]), path laws through `W₁` between
//! empirical finite-dimensional distributions ([`pathlaw_w1`]), and
//! tightness through entropy and the path statistics of [`crate::paths`].
//! Every comparison carries an explicit budget built from the fibre bounds of
//! the collapse maps; convergence claims are trend assertions over the
//! configured `n`, not limits.

mod diagnostics;
mod family;
mod fdd;
mod mcshane;
mod pathlaw;

pub use diagnostics::{
    entropy_tightness, initial_law_w1, EntropyRow, EntropyTightness, InitialLawRow,
};
pub use family::{cone_limit, FamilyMember, LipschitzTestFunction, SpaceFamily};
pub use fdd::{
    fdd_convergence_report, fdd_operator, pmg_test, FddProbe, FddReport, FddRow, PmgReport, PmgRow,
    StartMode,
};
pub use mcshane::{mcshane_extend, McShaneExtension, LIPSCHITZ_SLACK};
pub use pathlaw::{pathlaw_w1, PathLawSettings, PathLawW1, MAX_GRID_NODES};

use serde::{Deserialize, Serialize};

use crate::heat::{HeatGrid, SpectralKernel};
use crate::Result;

/// Quadrature settings shared by a space family and its limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    /// Nodes per axis on continuous one-dimensional charts, and along the
    /// first factor of a torus.
    pub resolution: usize,
    /// Nodes along the collapsing factor of a torus.
    pub fiber_resolution: usize,
    /// Quadrature allowance added to every budget.
    pub tolerance: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            resolution: 512,
            fiber_resolution: 32,
            tolerance: 1e-6,
        }
    }
}

pub(crate) fn heat_grid(kernel: &SpectralKernel, settings: &GridSettings) -> Result<HeatGrid> {
    HeatGrid::with_shape(kernel, &[settings.resolution, settings.fiber_resolution])
}

/// Shape of a sequence of gaps ordered by `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    StrictlyDecreasing,
    /// Each gap is at most the previous one plus its own budget.
    DecreasingWithinBudget,
    NotDecreasing,
    /// Fewer than two gaps.
    InsufficientPoints,
}

impl Trend {
    /// Whether the trend check holds (`None` when there is nothing to check).
    pub fn holds(self) -> Option<bool> {
        match self {
            Trend::StrictlyDecreasing | Trend::DecreasingWithinBudget => Some(true),
            Trend::NotDecreasing => Some(false),
            Trend::InsufficientPoints => None,
        }
    }
}

pub fn trend(gaps: &[f64], budgets: &[f64]) -> Trend {
    if gaps.len() < 2 {
        Trend::InsufficientPoints
    } else if gaps.windows(2).all(|w| w[1] < w[0]) {
        Trend::StrictlyDecreasing
    } else if gaps
        .windows(2)
        .zip(&budgets[1..])
        .all(|(w, b)| w[1] <= w[0] + b)
    {
        Trend::DecreasingWithinBudget
    } else {
        Trend::NotDecreasing
    }
}
