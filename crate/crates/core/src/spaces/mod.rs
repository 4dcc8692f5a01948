//! Pointed metric measure spaces: concrete models, reference measures,
//! collapse maps and volume diagnostics.

mod collapse;
mod cone;
mod domain;
mod finite;
pub mod geometry;
mod measure;
mod model;
mod potential;

pub use collapse::{collapse_map_torus, CollapseMap};
pub use cone::mesh_cone;
pub use domain::ConvexDomain;
pub use finite::FiniteMms;
pub use geometry::{ball_mass, bishop_gromov_check, volume_growth_check};
pub use measure::{weighted_measure, Quadrature, WeightBranch, WeightedMeasure};
pub use model::{MassMode, PmmSpace, SpaceKind};
pub use potential::Potential;

pub(crate) use model::circle_dist;
