//! Numerical laboratory for the Dirichlet problem `Φ(x,|Du|) F(D²u) = f` with
//! singular or degenerate gradient weights `Φ` and uniformly elliptic `F`.
//!
//! The crate is organised bottom-up:
//!
//! * [`operators`] — symmetric matrices, Pucci extremal operators and the other
//!   built-in elliptic operators;
//! * [`degeneracy`] — gradient weights `Φ(x,t)` with their growth indices and
//!   the rescalings used by the regularity theory;
//! * [`geometry`] — domains given by signed distance, Cartesian grids and
//!   boundary data;
//! * [`scheme`] — the monotone wide-stencil discretization;
//! * [`solver`] — pseudo-time relaxation with ε-continuation and explicit
//!   barrier sub/supersolutions;
//! * [`analysis`] — checks of the ABP estimate, barrier bounds, comparison and
//!   boundary `C^{1,α}` decay on computed solutions.

pub mod analysis;
pub mod degeneracy;
mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod operators;
pub mod scheme;
pub mod solver;

pub use error::{Error, Result};
pub use field::Field;

/// A point in the plane. All grids are two dimensional.
pub type Point = [f64; 2];
