//! The basis `W` paired with a cPCA++ filter bank, oblique-projection
//! denoising and the GLRT statistic.

use crate::error::{Error, Result};
use crate::linalg::{auto_loading, orthonormalize, Cholesky, Matrix};
use crate::reducers::FilterBank;
use crate::stats::{CovariancePair, DataMatrix};

/// `W` (atoms as columns) and `F` with `FᵀW = I`.
///
/// Columns of `W` are deliberately left unnormalized; rescaling them would
/// break the biorthogonality.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub w: Matrix,
    pub f: Matrix,
    /// Diagonal of `Fᵀ·R_b·F`.
    pub lambda_diag: Vec<f64>,
}

impl FactorModel {
    pub fn features(&self) -> usize {
        self.f.rows()
    }

    pub fn k(&self) -> usize {
        self.f.cols()
    }

    /// The leading `k` atoms and filters.
    ///
    /// For cPCA++ banks `FᵀR_bF` is diagonal, so truncation keeps `FᵀW = I`.
    pub fn truncate(&self, k: usize) -> Result<FactorModel> {
        if k == 0 || k > self.k() {
            return Err(Error::arg(format!("k must lie in 1..={}, got {k}", self.k())));
        }
        Ok(FactorModel {
            w: self.w.leading_columns(k),
            f: self.f.leading_columns(k),
            lambda_diag: self.lambda_diag[..k].to_vec(),
        })
    }

    /// `W·Fᵀ`.
    pub fn projector(&self) -> Matrix {
        self.w
            .matmul(&self.f.transpose())
            .expect("W and F share their shape")
    }
}

/// `W = R_b·F·(Fᵀ·R_b·F)⁻¹` with the loaded `R_b` of `pair`.
pub fn recover_w(pair: &CovariancePair, bank: &FilterBank) -> Result<FactorModel> {
    if bank.features() != pair.features() {
        return Err(Error::shape(format!(
            "filter bank has {} features, covariances have {}",
            bank.features(),
            pair.features()
        )));
    }
    let r_b = pair.loaded_r_b();
    let rf = r_b.matmul(&bank.f)?;
    let mut g = bank.f.tr_matmul(&rf)?;
    g.symmetrize();
    let lambda_diag = g.diag();
    let chol = Cholesky::new(&g)
        .map_err(|_| Error::Rank("F^T R_b F is singular".to_string()))?;
    // W = (RF)·G⁻¹, i.e. Wᵀ = G⁻¹·(RF)ᵀ since G is symmetric.
    let wt = chol.solve_matrix(&rf.transpose());
    Ok(FactorModel {
        w: wt.transpose(),
        f: bank.f.clone(),
        lambda_diag,
    })
}

/// `ẑ = W·Fᵀ·z`.
pub fn denoise(model: &FactorModel, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != model.features() {
        return Err(Error::shape(format!(
            "vector has length {}, model expects {}",
            z.len(),
            model.features()
        )));
    }
    let y = model.f.tr_mul_vec(z)?;
    model.w.mul_vec(&y)
}

/// `log |Wᵀ·A⁻¹·W|` for `A = L·Lᵀ`.
fn log_det_quadratic(chol: &Cholesky, w: &Matrix) -> Result<f64> {
    let mut x = Matrix::zeros(w.rows(), w.cols());
    for j in 0..w.cols() {
        x.set_column(j, &chol.solve_lower(&w.column(j)));
    }
    let mut g = x.tr_matmul(&x)?;
    g.symmetrize();
    let c = Cholesky::new(&g).map_err(|_| Error::Rank("W^T A^-1 W is singular".to_string()))?;
    Ok(c.log_det())
}

/// `|Wᵀ·R_b⁻¹·W| / |Wᵀ·(N_f/N_b·R_f + R_b)⁻¹·W|`.
///
/// `R_b` receives the same automatic loading as [`build_covariance_pair`];
/// both determinants are evaluated through Cholesky log-determinants.
///
/// [`build_covariance_pair`]: crate::stats::build_covariance_pair
pub fn glrt_statistic(z_f: &DataMatrix, z_b: &DataMatrix, w: &Matrix) -> Result<f64> {
    let m = z_b.features();
    if z_f.features() != m || w.rows() != m {
        return Err(Error::shape(format!(
            "feature counts disagree: foreground {}, background {}, W {}",
            z_f.features(),
            m,
            w.rows()
        )));
    }
    if w.cols() == 0 || w.cols() > m {
        return Err(Error::Rank(format!("W has {} columns for {m} features", w.cols())));
    }
    orthonormalize(w)?;
    let r_f = z_f.second_moment()?;
    let r_b = z_b.second_moment()?;
    let r_b = r_b.add_diag(auto_loading(&r_b)?);
    let ratio = z_f.samples() as f64 / z_b.samples() as f64;
    let mut mixed = r_f.scale(ratio).add(&r_b)?;
    mixed.symmetrize();
    let num = log_det_quadratic(&Cholesky::new(&r_b)?, w)?;
    let den = log_det_quadratic(&Cholesky::new(&mixed)?, w)?;
    Ok((num - den).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::{random_matrix, random_psd, random_spd};
    use crate::reducers::fit_cpcapp;

    fn pair_from(r_b: Matrix, r_f: Matrix) -> CovariancePair {
        let m = r_b.rows();
        CovariancePair {
            r_b,
            r_f,
            loading: 0.0,
            n_b: 1,
            n_f: 1,
            mean_b: vec![0.0; m],
            mean_f: vec![0.0; m],
        }
    }

    #[test]
    fn identity_background_gives_w_equal_f() {
        let pair = pair_from(Matrix::identity(4), random_psd(4, 4, 1));
        let bank = fit_cpcapp(&pair, 2).unwrap();
        let model = recover_w(&pair, &bank).unwrap();
        assert!(model.w.sub(&bank.f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn biorthogonality_on_random_pair() {
        let pair = pair_from(random_spd(8, 2), random_psd(8, 5, 3));
        let bank = fit_cpcapp(&pair, 3).unwrap();
        let model = recover_w(&pair, &bank).unwrap();
        let ftw = bank.f.tr_matmul(&model.w).unwrap();
        assert!(ftw.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-8);
        // F is R_b-orthogonal, so FᵀR_bF is diagonal.
        let g = bank.f.tr_matmul(&pair.r_b.matmul(&bank.f).unwrap()).unwrap();
        let off = g.sub(&Matrix::from_diag(&g.diag())).unwrap().frobenius_norm();
        let on: f64 = g.diag().iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(off < 1e-6 * on);
        assert!(model.lambda_diag.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn denoise_fixed_point_and_null_space() {
        let pair = pair_from(random_spd(5, 6), random_psd(5, 5, 7));
        let model = recover_w(&pair, &fit_cpcapp(&pair, 2).unwrap()).unwrap();
        let z = model.w.mul_vec(&[0.7, -1.3]).unwrap();
        let out = denoise(&model, &z).unwrap();
        for (a, b) in out.iter().zip(&z) {
            assert!((a - b).abs() < 1e-10);
        }
        // Remove the F-components: Fᵀz' = 0.
        let v = vec![1.0, 2.0, -1.0, 0.5, 3.0];
        let y = model.f.tr_mul_vec(&v).unwrap();
        let null: Vec<f64> = v
            .iter()
            .zip(model.w.mul_vec(&y).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        assert!(denoise(&model, &null).unwrap().iter().all(|x| x.abs() < 1e-10));
        assert!(matches!(denoise(&model, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn projector_is_idempotent() {
        let pair = pair_from(random_spd(6, 8), random_psd(6, 3, 9));
        let p = recover_w(&pair, &fit_cpcapp(&pair, 3).unwrap()).unwrap().projector();
        let p2 = p.matmul(&p).unwrap();
        assert!(p2.sub(&p).unwrap().frobenius_norm() <= 1e-6 * p.frobenius_norm());
    }

    #[test]
    fn glrt_identical_statistics_give_two_to_the_k() {
        let z = DataMatrix::new(random_matrix(5, 60, 1)).unwrap().center();
        let w = random_matrix(5, 3, 2);
        let s = glrt_statistic(&z, &z, &w).unwrap();
        assert!((s / 8.0 - 1.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn glrt_zero_foreground_gives_one() {
        let zb = DataMatrix::new(random_matrix(4, 30, 3)).unwrap().center();
        let zf = DataMatrix::from_centered(Matrix::zeros(4, 10), vec![0.0; 4]).unwrap();
        let s = glrt_statistic(&zf, &zb, &random_matrix(4, 2, 4)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glrt_rejects_rank_deficient_w() {
        let z = DataMatrix::new(random_matrix(4, 30, 3)).unwrap().center();
        let w = Matrix::from_columns(&[vec![1.0, 0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0]])
            .unwrap();
        assert!(matches!(glrt_statistic(&z, &z, &w), Err(Error::Rank(_))));
    }

    #[test]
    fn glrt_invariant_to_invertible_mixing() {
        let zb = DataMatrix::new(random_matrix(5, 50, 5)).unwrap().center();
        let zf = DataMatrix::new(random_matrix(5, 40, 6).scale(2.0)).unwrap().center();
        let w = random_matrix(5, 2, 7);
        let mix = Matrix::from_rows(&[vec![2.0, 1.0], vec![-0.5, 3.0]]).unwrap();
        let a = glrt_statistic(&zf, &zb, &w).unwrap();
        let b = glrt_statistic(&zf, &zb, &w.matmul(&mix).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-7 * a);
        assert!(a >= 1.0 - 1e-9);
    }
}
