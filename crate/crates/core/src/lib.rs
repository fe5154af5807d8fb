//! Approximate controllability of the 1D semilinear heat equation
//!
//! ∂_t u − ∂_xx u + f(u) = h·1_ω on (0,1) × (0,T), u = 0 on the boundary,
//!
//! with controls built from the spectrum of the discrete controllability
//! Gramian, a penalized HUM null control, and a σ-homotopy fixed point for
//! the nonlinearity. The `cost_lab` module runs ε-sweeps and fits the
//! growth of the control cost.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cost_lab;
pub mod error;
pub mod heat1d;
pub mod linctrl;
pub mod numerics;
pub mod semictrl;

pub use error::{Error, Result};
