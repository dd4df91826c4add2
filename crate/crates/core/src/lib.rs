//! Entropy-conservative and entropy-stable space-time finite volumes for the
//! one-dimensional Euler equations.
//!
//! Interface fluxes are built in both the spatial and the temporal direction.
//! Time slabs can be solved one at a time (upwind in time), in coupled blocks,
//! or all together, and an entropy ledger attributes every bit of entropy
//! production to the interface that generated it.

pub mod dissipation;
pub mod entropy_ledger;
pub mod error;
pub mod flux_algebra;
pub mod gas_model;
mod linalg;
pub mod problems;
pub mod quadrature;
pub mod spacetime_solver;

pub use error::{Error, Result};
pub use gas_model::{ConsState, EntropyVars, GasParams, PrimState, Vec3, ZVars};
pub use quadrature::QuadratureRule;
