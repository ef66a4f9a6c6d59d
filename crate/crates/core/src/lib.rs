//! Symmetry-preserving (mimetic) finite differences of arbitrary even order
//! on structured, periodic, curvilinear staggered grids.
//!
//! The discrete divergence, gradient, density-weighted gradients and the
//! advection operator are built so that the structural identities of their
//! continuous counterparts (null spaces, adjoint relations, chain rules,
//! skew symmetry) hold to machine precision. Conservation of mass, momentum
//! and total energy for the built-in models then follows from the same
//! algebra as in the continuous setting, independent of grid distortion.
//!
//! Modules:
//! - [`mapping`], [`grid`]: periodic curvilinear geometry — point locations,
//!   SVD-based local orientations, integration weights, flux coefficients.
//! - [`linops`]: weighted inner products, sparse operators with true weighted
//!   adjoints, staggering/destaggering interpolations and difference stencils.
//! - [`mimetic`]: assembly of DIV, GRAD and friends from those pieces.
//! - [`models`]: semi-discrete right-hand sides for the linear-wave,
//!   compressible-wave and isentropic Euler (shallow-water) models.
//! - [`diagnostics`]: conserved quantities and the operator-identity audit.
//! - [`exact`]: closed-form and simple-wave reference solutions.
//! - [`timeint`]: adaptive embedded Runge-Kutta integration.

pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod field;
pub mod grid;
pub mod linops;
pub mod mapping;
pub mod mimetic;
pub mod models;
pub mod timeint;

pub use error::Error;
pub use field::{CellField, FaceField, StagVecField};
pub use grid::StaggeredGrid;
pub use linops::LinOp;
pub use mapping::MappingSpec;
pub use mimetic::OperatorBundle;
pub use models::{Model, ModelState, StateEquation};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
