//! Galerkin and nonlinear Galerkin (two-grid) mixed finite elements for the 2D
//! incompressible Navier–Stokes equations on the unit square.
//!
//! The fine Galerkin solution `u_h` and the two-scale solution `u^h = y^H + z^h`
//! share one fine velocity space; the large scales `y^H` live in a nested coarse
//! space and the small scales `z^h` in its L²-orthogonal complement.

pub mod error;
pub mod fem;
pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod mms;
pub mod schemes;
pub mod twogrid;

pub use error::{Error, Result};
