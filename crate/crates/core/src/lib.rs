//! Numerical laboratory for forward discretely self-similar (DSS) solutions
//! of the 3D incompressible Navier-Stokes equations.
//!
//! The unknown is the correction `v = u - sigma * e^{t Delta} u0` sampled on the
//! fundamental strip `R^3 x [1, lambda^2)`. Fixed points of
//! `v = -Phi[(sigma U + E v) (x) (sigma U + E v)]|_Q` are computed by damped
//! Picard iteration with Anderson mixing and continued in `sigma`.

pub mod diagnostics;
pub mod error;
pub mod estimates;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod initial_data;
pub mod kernels;
pub mod lattice;
pub mod pressure;
pub mod quadrature;
pub mod semigroup;
pub mod sh;
pub mod solver;
pub mod stokes;
pub mod vec3;

pub use error::{Error, Result};
