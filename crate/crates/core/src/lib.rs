//! Numerical laboratory for variable-exponent Lebesgue spaces and the
//! non-homogeneous p(x)-Laplacian system
//!
//! ```text
//!     -div(|Du|^{p(x)-2} Du) = -div(|G|^{p(x)-2} G)
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerics:
//!
//! * [`grid`]: uniform Cartesian grids, Q1 nodal fields, cell fields and
//!   overlap quadrature on axis-parallel boxes.
//! * [`exponent`]: sampled exponents p(x), log-Hölder diagnostics and the
//!   comparison exponent p_j of a cube.
//! * [`varlp`]: modulars, Luxemburg and Marcinkiewicz norms and measured
//!   forms of the key Jensen estimate, Sobolev–Poincaré and the log-mean bound.
//! * [`dyadic`]: root-dyadic lattices, localized maximal operators, level sets,
//!   Calderón–Zygmund coverings and good-λ measurements.
//! * [`operator`]: the flux A(x, z), its structure constants and the discrete
//!   energy with exact gradient and Hessian.
//! * [`solver`]: damped Newton with γ-continuation for the full system and the
//!   constant-exponent comparison problem, plus manufactured instances.
//! * [`estimates`]: the verification harness (Caccioppoli, reverse Hölder,
//!   Gehring scan, comparison lemmas, higher integrability, level-set
//!   integration).
//!
//! File formats, the command-line front end and image I/O live in the
//! companion `varexp` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dyadic;
pub mod error;
pub mod estimates;
pub mod exponent;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod record;
pub mod solver;
pub mod varlp;

pub use error::{Error, Result};
pub use geometry::{Point, Region, MAX_DIM};
pub use grid::{CellField, Grid, GridFunction};
