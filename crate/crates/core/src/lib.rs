//! Numerical laboratory for Brownian motion on metric measure spaces.
//!
//! The crate realizes the computable objects behind the equivalence between
//! pointed measured Gromov convergence of spaces and weak convergence of their
//! Brownian motions:
//!
//! - [`spaces`]: pointed metric measure spaces (circles, flat tori, intervals,
//!   log-concave Euclidean spaces, finite discretizations), weighted reference
//!   measures and collapse maps onto limit spaces.
//! - [`heat`]: heat kernels and heat semigroups, spectral gaps, entropy and the
//!   kernel-level checks (Chapman–Kolmogorov, Feller, Gaussian bounds).
//! - [`transport`]: exact optimal transport (network simplex), 1-D quantile
//!   formulas, Kantorovich–Rubinstein dual bounds, displacement interpolation.
//! - [`paths`]: seeded path samplers (kernel chains, Euler–Maruyama, reflected
//!   Euler–Maruyama), finite-dimensional distributions and tightness statistics.
//! - [`convergence`]: the harness that compares a family of spaces with its
//!   limit at the level of measures, semigroups and path laws.
//!
//! Generator convention: the semigroup generator is the full weighted
//! Laplacian `Δ − ∇V·∇`, so Brownian motion on the line has variance `2t` and
//! the SDE form is `dX = −∇V(X) dt + √2 dW`.

// `!(x > 0.0)` is how NaN gets rejected, and index loops read closer to the
// formulas in the numerical kernels.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod convergence;
pub mod error;
pub mod heat;
pub mod numeric;
pub mod paths;
pub mod report;
pub mod rng;
pub mod spaces;
pub mod transport;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
