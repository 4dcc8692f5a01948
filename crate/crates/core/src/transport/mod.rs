//! Exact optimal transport between finitely supported measures.
//!
//! `W_p` is solved as an uncapacitated min-cost flow by network simplex, so
//! optima are exact up to round-off and come with a dual certificate. On the
//! line the quantile formula is used, on the circle a lifting over cyclic
//! shifts. Lower bounds on `W₁` come from Kantorovich–Rubinstein duality over
//! a finite family of Lipschitz functions.

mod convexity;
mod dual;
mod exact;
mod measure;
mod one_d;
mod simplex;

pub use convexity::{
    cell_interpolate, cell_w2_squared, entropy_convexity_check, CellMeasure, ConvexityReport,
    ConvexityRow,
};
pub use dual::{distance_family, hat_ramp_family, kr_dual_bound, LipschitzFunction};
pub use exact::{grid_w1, wasserstein_exact, wasserstein_on_space};
pub use measure::{DiscreteMeasure, TransportPlan, MERGE_RADIUS};
pub use one_d::{
    displacement_interpolation_1d, quantile_coupling, wasserstein_1d, wasserstein_circle,
    CIRCLE_LIFT_MAX_ATOMS,
};
pub use simplex::{min_cost_flow, FlowSolution};
