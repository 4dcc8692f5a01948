//! Seeded path samplers and path statistics.
//!
//! Every path draws from its own ChaCha stream keyed by `(master seed, path
//! index)`, and paths are sampled in parallel and collected in index order,
//! so an ensemble is bit-identical for a given seed whatever the thread
//! count.

mod ensemble;
mod sampler;
mod stats;

pub use ensemble::{DivergenceRecord, InitialLaw, PathEnsemble, PathSample};
pub use sampler::{
    euler_maruyama, reflected_em, sample_kernel_chain, Boundary, SdeConfig, DIVERGENCE_BOUND,
};
pub use stats::{
    extract_fdd, fdd_metric, kolmogorov_moment, modulus_statistic, KolmogorovRow, KolmogorovTable,
    ModulusEstimate,
};
