//! Axisymmetric Landau–de Gennes minimization around a spherical colloid with weak
//! (Rapini–Papoular) anchoring, and analysis of the resulting boojum defects.
//!
//! The unknown is a unit 3-vector field `u(ρ, z)` on the meridian half-plane outside
//! the unit disk; the 5-component order parameter is recovered as `w = L[u]`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod anchoring;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod defects;
pub mod energy;
pub mod error;
pub mod grid;
pub mod minimizer;
pub mod tangent_ode;
pub mod tensor;
pub mod util;

pub use error::{Error, Result};
