//! Positive-definite helpers and the `Q = R_b⁻¹R_f` eigenproblem.

use super::eigen::{apply_sign_convention, check_symmetric, sym_eig, EigenResult};
use super::matrix::{norm2, Matrix};
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a covariance is auto-loaded.
pub const LOADING_FLOOR: f64 = 1e-10;
/// Relative loading applied when the floor is violated.
pub const LOADING_FACTOR: f64 = 1e-6;

/// Lower-triangular Cholesky factor `L` with `a = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        check_symmetric(a)?;
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Definiteness(format!("non-positive pivot {d:e} at {j}")));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let (li, lj) = (l.row(i), l.row(j));
                let s: f64 = li[..j].iter().zip(&lj[..j]).map(|(x, y)| x * y).sum();
                l[(i, j)] = (a[(i, j)] - s) / d;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L·x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut x = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `Lᵀ·x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let xi = x[i] / self.l[(i, i)];
            x[i] = xi;
            let row = self.l.row(i);
            for (xk, &lik) in x[..i].iter_mut().zip(&row[..i]) {
                *xk -= lik * xi;
            }
        }
        x
    }

    /// Solves `a·x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `a⁻¹·B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_column(j, &self.solve(&b.column(j)));
        }
        out
    }

    /// `log |a|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Symmetric inverse square root `B = a^{-1/2}` with `B·a·B = I`.
///
/// Fails with a definiteness error if any eigenvalue is `<= 0`; load the
/// matrix first with [`diagonal_load`].
pub fn inv_sqrt_sym(a: &Matrix) -> Result<Matrix> {
    let eig = sym_eig(a)?;
    let n = a.rows();
    if let Some(&min) = eig.values.last() {
        if !(min > 0.0) {
            return Err(Error::Definiteness(format!("smallest eigenvalue is {min:e}")));
        }
    }
    let scale: Vec<f64> = eig.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    let v = &eig.vectors;
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| v[(i, k)] * scale[k] * v[(j, k)]).sum();
            b[(i, j)] = s;
            b[(j, i)] = s;
        }
    }
    Ok(b)
}

/// `a + rho·I`.
pub fn diagonal_load(a: &Matrix, rho: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::arg(format!("loading must be a finite non-negative scalar, got {rho}")));
    }
    Ok(a.add_diag(rho))
}

/// Loading needed to make a PSD covariance safely invertible.
///
/// Returns `0` when the smallest eigenvalue is at least
/// `LOADING_FLOOR·trace/M`, otherwise `LOADING_FACTOR·trace/M`. The test is
/// a Cholesky factorization of `a − floor·I`, which succeeds exactly when
/// every eigenvalue exceeds the floor. A zero matrix gets `LOADING_FACTOR`.
pub fn auto_loading(a: &Matrix) -> Result<f64> {
    check_symmetric(a)?;
    let m = a.rows();
    if m == 0 {
        return Ok(0.0);
    }
    let mean_diag = a.trace() / m as f64;
    if !(mean_diag > 0.0) {
        return Ok(LOADING_FACTOR);
    }
    let floor = LOADING_FLOOR * mean_diag;
    if Cholesky::new(&a.add_diag(-floor)).is_ok() {
        Ok(0.0)
    } else {
        Ok(LOADING_FACTOR * mean_diag)
    }
}

/// Top-`k` eigenpairs of the non-symmetric `Q = R_b⁻¹·R_f`.
///
/// `R_b` must be positive definite (load it beforehand). The problem is
/// reduced to the symmetric matrix `L⁻¹·R_f·L⁻ᵀ` with `R_b = L·Lᵀ`, which is
/// similar to `Q`; its eigenvectors `x` map back to `v = L⁻ᵀx/‖L⁻ᵀx‖`.
/// Exactly one symmetric eigendecomposition is performed.
pub fn q_eig(r_b: &Matrix, r_f: &Matrix, k: usize) -> Result<EigenResult> {
    check_symmetric(r_f)?;
    if r_b.shape() != r_f.shape() {
        return Err(Error::shape(format!(
            "R_b is {}x{} but R_f is {}x{}",
            r_b.rows(),
            r_b.cols(),
            r_f.rows(),
            r_f.cols()
        )));
    }
    let m = r_b.rows();
    if k == 0 || k > m {
        return Err(Error::arg(format!("k must lie in 1..={m}, got {k}")));
    }
    let chol = Cholesky::new(r_b)?;

    // X = L⁻¹·R_f, then R = L⁻¹·Xᵀ (= L⁻¹·R_f·L⁻ᵀ since R_f is symmetric).
    let mut x = Matrix::zeros(m, m);
    for j in 0..m {
        x.set_column(j, &chol.solve_lower(&r_f.column(j)));
    }
    let mut r = Matrix::zeros(m, m);
    for j in 0..m {
        r.set_column(j, &chol.solve_lower(x.row(j)));
    }
    r.symmetrize();

    let eig = sym_eig(&r)?;
    let mut vectors = Matrix::zeros(m, k);
    for i in 0..k {
        let mut v = chol.solve_upper(&eig.vector(i));
        let norm = norm2(&v);
        v.iter_mut().for_each(|c| *c /= norm);
        apply_sign_convention(&mut v);
        vectors.set_column(i, &v);
    }
    Ok(EigenResult {
        values: eig.values[..k].to_vec(),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::{random_psd, random_spd};

    fn assert_identity(m: &Matrix, tol: f64) {
        let n = m.rows();
        let diff = m.sub(&Matrix::identity(n)).unwrap().max_abs();
        assert!(diff <= tol, "deviation from identity {diff:e}");
    }

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        assert_identity(&inv_sqrt_sym(&Matrix::identity(3)).unwrap(), 1e-15);
        let b = inv_sqrt_sym(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!((b[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((b[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b[(0, 1)], 0.0);
    }

    #[test]
    fn inv_sqrt_whitens_random_spd() {
        let a = random_spd(5, 3);
        let b = inv_sqrt_sym(&a).unwrap();
        assert_eq!(b.asymmetry(), Some(0.0));
        let bab = b.matmul(&a).unwrap().matmul(&b).unwrap();
        assert_identity(&bab, 1e-7);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let a = Matrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(inv_sqrt_sym(&a), Err(Error::Definiteness(_))));
    }

    #[test]
    fn diagonal_load_examples() {
        assert_eq!(diagonal_load(&Matrix::zeros(2, 2), 1.0).unwrap(), Matrix::identity(2));
        assert_eq!(diagonal_load(&Matrix::identity(2), 0.0).unwrap(), Matrix::identity(2));
        assert!(matches!(
            diagonal_load(&Matrix::identity(2), -1.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(diagonal_load(&Matrix::zeros(2, 3), 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn auto_loading_lifts_rank_deficient_gram() {
        // Three samples in five dimensions.
        let a = random_psd(5, 3, 8);
        let rho = auto_loading(&a).unwrap();
        assert!(rho > 0.0);
        let loaded = diagonal_load(&a, rho).unwrap();
        let min = *sym_eig(&loaded).unwrap().values.last().unwrap();
        assert!(min >= rho * (1.0 - 1e-6), "min eigenvalue {min:e} < rho {rho:e}");
        assert_eq!(auto_loading(&random_spd(5, 1)).unwrap(), 0.0);
    }

    #[test]
    fn cholesky_solves() {
        let a = random_spd(6, 4);
        let c = Cholesky::new(&a).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let x = c.solve(&b);
        let back = a.mul_vec(&x).unwrap();
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn q_eig_identity_background_gives_plain_eigenpairs() {
        let r_f = random_psd(4, 6, 2);
        let q = q_eig(&Matrix::identity(4), &r_f, 4).unwrap();
        let s = sym_eig(&r_f).unwrap();
        for i in 0..4 {
            assert!((q.values[i] - s.values[i]).abs() < 1e-12);
            let (a, b) = (q.vector(i), s.vector(i));
            let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn q_eig_rejects_bad_input() {
        let i2 = Matrix::identity(2);
        assert!(matches!(q_eig(&i2, &i2, 0), Err(Error::Argument(_))));
        assert!(matches!(q_eig(&i2, &i2, 3), Err(Error::Argument(_))));
        assert!(matches!(q_eig(&Matrix::identity(3), &i2, 1), Err(Error::Shape(_))));
        let singular = Matrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(q_eig(&singular, &i2, 1), Err(Error::Definiteness(_))));
    }
}
