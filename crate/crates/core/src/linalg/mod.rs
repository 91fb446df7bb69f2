//! Dense real linear algebra: the [`Matrix`] type, symmetric
//! eigendecomposition, Cholesky, inverse square roots, diagonal loading and
//! the `R_b⁻¹R_f` eigenproblem.
//!
//! All routines are pure functions of their inputs.

mod eigen;
mod matrix;
mod spd;
mod subspace;

pub use eigen::{
    apply_sign_convention, count_decompositions, decomposition_count, sym_eig, EigenResult,
    JACOBI_MAX_DIM, SYMMETRY_TOL,
};
pub(crate) use eigen::{credit_decompositions, detach_decompositions};
pub use matrix::{dot, norm2, Matrix};
pub use spd::{
    auto_loading, diagonal_load, inv_sqrt_sym, q_eig, Cholesky, LOADING_FACTOR, LOADING_FLOOR,
};
pub use subspace::{max_principal_angle, orthonormalize};
