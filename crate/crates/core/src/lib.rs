//! Uncertainty propagation through network-coupled two-component systems.
//!
//! The crate combines nonlinear elimination of component states, intrusive
//! stochastic Galerkin projection onto orthonormal Legendre chaos bases, and
//! reduced polynomial bases with sparse modified quadrature rules that skip
//! most expensive component solves.
//!
//! Module overview:
//!
//! * [`chaos_basis`], [`quadrature`], [`pseudospectral`]: tensor Legendre
//!   bases, Gauss-Legendre grids and discrete projection.
//! * [`reduction`], [`lp_solver`]: reduced bases in intermediate variables and
//!   sparse nonnegative quadrature weights from a phase-one simplex.
//! * [`network`]: deterministic coupled solvers.
//! * [`galerkin`]: stochastic Galerkin Newton in full and reduced variants.
//! * [`models`]: the composite-function benchmark and a 1-D heat network.

pub mod chaos_basis;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod lp_solver;
pub mod models;
pub mod network;
pub mod pseudospectral;
pub mod quadrature;
pub mod reduction;

pub use error::{Error, ErrorKind, Result};
