//! Subspace comparisons.

use super::eigen::sym_eig;
use super::matrix::{dot, norm2, Matrix};
use crate::error::{Error, Result};

/// Orthonormal basis of the column space of `a` (modified Gram–Schmidt,
/// applied twice). Fails if the columns are numerically dependent.
pub fn orthonormalize(a: &Matrix) -> Result<Matrix> {
    let mut q = Matrix::zeros(a.rows(), a.cols());
    for j in 0..a.cols() {
        let mut v = a.column(j);
        let scale = norm2(&v);
        for _ in 0..2 {
            for p in 0..j {
                let qp = q.column(p);
                let c = dot(&qp, &v);
                v.iter_mut().zip(&qp).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm2(&v);
        if !(n > 1e-12 * scale) {
            return Err(Error::Rank(format!("column {j} is linearly dependent")));
        }
        v.iter_mut().for_each(|x| *x /= n);
        q.set_column(j, &v);
    }
    Ok(q)
}

/// Largest principal angle (radians) between the column spaces of `a` and
/// `b`, which must have the same shape.
///
/// Computed from the sine side, `σ_max((I − QaQaᵀ)Qb)`, so that small angles
/// keep full relative accuracy.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "subspaces have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let qa = orthonormalize(a)?;
    let qb = orthonormalize(b)?;
    let c = qa.tr_matmul(&qb)?;
    let resid = qb.sub(&qa.matmul(&c)?)?;
    let mut g = resid.tr_matmul(&resid)?;
    g.symmetrize();
    let top = sym_eig(&g)?.values[0].max(0.0);
    Ok(top.sqrt().min(1.0).asin())
}
