//! Dense numerical kernels shared by the solvers and controllers.

mod cg;
mod eig;
mod field;
mod grid;
mod matrix;
pub mod quadrature;
mod svd;
mod tridiag;

pub use cg::{cg_solve, CgSolution};
pub use eig::{eig_symmetric, SymmetricEigen};
pub use field::{SpaceField, SpaceTimeField};
pub(crate) use field::check_omega_support;
pub use grid::Grid;
pub use matrix::DenseMatrix;
pub use quadrature::{h1_norm, l2_inner, l2_norm, st_inner, st_norm, sup_norm};
pub use svd::{thin_svd, ThinSvd};
pub use tridiag::{solve_tridiagonal, TridiagFactor};
