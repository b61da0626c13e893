//! Geometric control toolkit for frame-presented control systems.
//!
//! Control systems are given by frames of polynomial vector fields with exact
//! rational coefficients, `dx/dt = sum_i u_i X_i(x)`. On top of that the crate
//! provides:
//!
//! - [`vecfield`]: exact multivariate polynomial arithmetic, Lie brackets,
//!   covector pairings and coordinate-projection pushforwards;
//! - [`flags`]: derived flags of distributions, growth vectors, exact rank
//!   over the rationals, bracket-generation and (2,3,5) detection;
//! - [`control`]: trajectory integration, endpoint maps and their
//!   differentials, singular-control detection, quotients and equivalences;
//! - [`extremals`]: constrained Hamiltonian systems of the maximum principle
//!   for normal and abnormal extremals, shooting, residual reports;
//! - [`cartan`]: the prolongation of a rank-2 growth-(2,3,5) distribution to
//!   the space of its tangent lines, the local leaf space of lifted abnormal
//!   geodesics, the induced cone system, and numerical checks of the
//!   duality/asymmetry statements relating the two fibrations;
//! - [`srmetric`]: sub-Riemannian product metrics on pseudo-product
//!   splittings and the explicit constrained Hamiltonian systems of the
//!   associated optimal control problems.
//!
//! Batch drivers run data-parallel with `rayon` when the `parallel` feature
//! (on by default) is enabled, and fall back to sequential iteration
//! otherwise.

pub mod cartan;
pub mod control;
pub mod error;
pub mod extremals;
pub mod flags;
pub mod linalg;
pub mod par;
pub mod srmetric;
#[cfg(test)]
pub(crate) mod testkit;
pub mod vecfield;

pub use error::{Error, Result};
