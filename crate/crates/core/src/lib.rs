//! Periodic orbits of the planar Hill four-body problem.
//!
//! The crate covers the whole pipeline from the vector field to traced
//! families of periodic orbits:
//!
//! - [`dynamics`]: parameters, effective potential, equations of motion,
//!   Jacobi integral and discrete symmetries.
//! - [`equilibria`]: equilibrium points, spectra, critical mass, resonances
//!   and linear seeds around `L3`.
//! - [`regularization`]: Levi-Civita coordinates for collision orbits.
//! - [`propagation`]: high-accuracy integration with dense output, events
//!   and variational equations.
//! - [`periodic`]: differential correction and stability indices.
//! - [`continuation`]: pseudo-arclength tracing of families with event
//!   detection and branch switching.
//! - [`reference`] and [`acceptance`]: published values and the checks
//!   that compare the crate against them.

pub mod acceptance;
pub mod continuation;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod periodic;
pub mod propagation;
pub mod reference;
pub mod regularization;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dynamics::{HamiltonianState, PhaseState, Symmetry, SystemParams};
pub use error::{Error, Result};
