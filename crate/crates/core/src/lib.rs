//! Hopf bifurcation analysis for the delayed reaction-diffusion-advection
//! population model
//!
//! ```text
//! v_t = e^{-alpha m} (e^{alpha m} v_x)_x + lambda v [m(x) - e^{alpha m} v(x, t - tau)]
//! ```
//!
//! on an interval with Dirichlet or no-flux boundary conditions.
//!
//! The pipeline runs bottom-up: [`domain`] assembles the flux-form operator,
//! [`eigen`] finds the principal eigenpair of the indefinite-weight problem,
//! [`steady`] computes the positive steady state and its expansion data,
//! [`hopf`] solves the characteristic system and builds the ladder of
//! critical delays, [`normalform`] classifies the bifurcation, and
//! [`dde_sim`] integrates the delayed PDE to check all of it independently.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dde_sim;
pub mod domain;
pub mod eigen;
mod error;
pub mod hopf;
pub mod linalg;
pub mod normalform;
pub mod steady;

pub use error::{Error, Result};
