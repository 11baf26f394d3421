//! Numerical laboratory for minimal-mass pseudo-conformal blow-up of the
//! mass-critical inhomogeneous nonlinear Schrödinger equation
//!
//! ```text
//! i∂_t u + Δu − V(x)u + g(x)|u|^{4/d}u = 0,   d ∈ {1, 2}.
//! ```
//!
//! The crate builds the ground state and the generalized kernel of the
//! linearized operator, solves the modulation system, evaluates all source
//! terms of the remainder equation, and runs the fixed-point construction of
//! the remainder w together with the maps back to the physical frame.

pub mod checks;
pub mod constructor;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod ground_state;
pub mod linops;
pub mod modulation;
pub mod profiles;
pub mod quad;
pub mod sources;
pub mod split;

pub use error::{Error, Result};
pub use grid::{Geometry, Grid, GridConfig, C64};
