//! Centering and second-order statistics.
//!
//! Covariances are normalized by `1/N`, not `1/(N-1)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{auto_loading, Matrix};

/// Sample collection with one sample per column (`M` features × `N` samples).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    mean: Option<Vec<f64>>,
}

impl DataMatrix {
    /// Wraps an `M×N` matrix of raw (uncentered) samples.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::arg(format!(
                "data matrix must be non-empty, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        Ok(Self { values, mean: None })
    }

    /// Builds a data matrix from samples given one per entry.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_columns(samples)?)
    }

    /// Wraps data that is already centered; `mean` is the offset that was
    /// removed.
    pub fn from_centered(values: Matrix, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != values.rows() {
            return Err(Error::shape(format!(
                "mean has length {} for {} features",
                mean.len(),
                values.rows()
            )));
        }
        let mut d = Self::new(values)?;
        d.mean = Some(mean);
        Ok(d)
    }

    pub fn features(&self) -> usize {
        self.values.rows()
    }

    pub fn samples(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.mean.is_some()
    }

    /// Mean removed by [`center`](Self::center), if centered.
    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    pub fn sample(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Per-feature sample mean of the stored values.
    pub fn column_mean(&self) -> Vec<f64> {
        let n = self.samples() as f64;
        (0..self.features())
            .map(|i| self.values.row(i).iter().sum::<f64>() / n)
            .collect()
    }

    /// Subset of samples by column index.
    pub fn select(&self, columns: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.samples()) {
            return Err(Error::arg(format!("sample index {bad} out of range")));
        }
        let m = Matrix::from_fn(self.features(), columns.len(), |i, j| {
            self.values[(i, columns[j])]
        });
        DataMatrix::new(m)
    }

    /// Subtracts the per-feature mean. Already-centered input is returned
    /// unchanged.
    pub fn center(&self) -> DataMatrix {
        if self.is_centered() {
            return self.clone();
        }
        let mean = self.column_mean();
        self.center_with(&mean)
    }

    /// Subtracts a caller-supplied offset (e.g. a training mean).
    pub fn center_with(&self, mean: &[f64]) -> DataMatrix {
        let mut values = self.values.clone();
        for (i, &mu) in mean.iter().enumerate() {
            values.row_mut(i).iter_mut().for_each(|v| *v -= mu);
        }
        DataMatrix {
            values,
            mean: Some(mean.to_vec()),
        }
    }

    /// `(1/N)·Z·Zᵀ`. Requires centered data.
    pub fn second_moment(&self) -> Result<Matrix> {
        if !self.is_centered() {
            return Err(Error::State(
                "second moment requires centered data".to_string(),
            ));
        }
        Ok(gram(&self.values))
    }
}

/// `(1/N)·Z·Zᵀ`, computed row pair by row pair. Each entry is a sequential
/// dot product, so the result does not depend on thread scheduling.
fn gram(z: &Matrix) -> Matrix {
    let m = z.rows();
    let inv_n = 1.0 / z.cols() as f64;
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let zi = z.row(i);
            (i..m)
                .map(|j| inv_n * zi.iter().zip(z.row(j)).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect();
    let mut out = Matrix::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            out[(i, i + off)] = v;
            out[(i + off, i)] = v;
        }
    }
    out
}

/// Free-function form of [`DataMatrix::center`].
pub fn center(raw: &DataMatrix) -> DataMatrix {
    raw.center()
}

/// Free-function form of [`DataMatrix::second_moment`].
pub fn second_moment(z: &DataMatrix) -> Result<Matrix> {
    z.second_moment()
}

/// Background/foreground second-order statistics.
///
/// `r_b` is stored unloaded; [`loaded_r_b`](Self::loaded_r_b) adds
/// `loading·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub r_b: Matrix,
    pub r_f: Matrix,
    pub loading: f64,
    pub n_b: usize,
    pub n_f: usize,
    pub mean_b: Vec<f64>,
    pub mean_f: Vec<f64>,
}

impl CovariancePair {
    pub fn features(&self) -> usize {
        self.r_b.rows()
    }

    pub fn loaded_r_b(&self) -> Matrix {
        self.r_b.add_diag(self.loading)
    }
}

/// Centers both partitions, forms `R_b` and `R_f` and picks the loading for
/// `R_b` with [`auto_loading`].
pub fn build_covariance_pair(bg: &DataMatrix, fg: &DataMatrix) -> Result<CovariancePair> {
    if bg.features() != fg.features() {
        return Err(Error::shape(format!(
            "background has {} features, foreground has {}",
            bg.features(),
            fg.features()
        )));
    }
    let zb = bg.center();
    let zf = fg.center();
    let r_b = zb.second_moment()?;
    let r_f = zf.second_moment()?;
    let loading = auto_loading(&r_b)?;
    Ok(CovariancePair {
        r_b,
        r_f,
        loading,
        n_b: bg.samples(),
        n_f: fg.samples(),
        mean_b: zb.mean().map(<[f64]>::to_vec).unwrap_or_default(),
        mean_f: zf.mean().map(<[f64]>::to_vec).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eig, test_util::random_matrix};

    #[test]
    fn center_two_points() {
        let d = DataMatrix::from_samples(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = d.center();
        assert_eq!(c.sample(0), vec![-1.0, -1.0]);
        assert_eq!(c.sample(1), vec![1.0, 1.0]);
        assert_eq!(c.mean().unwrap(), &[2.0, 3.0]);
        assert_eq!(c.center(), c);
    }

    #[test]
    fn center_single_sample() {
        let d = DataMatrix::from_samples(&[vec![5.0, -1.0, 2.0]]).unwrap();
        let c = d.center();
        assert_eq!(c.sample(0), vec![0.0; 3]);
        assert_eq!(c.mean().unwrap(), &[5.0, -1.0, 2.0]);
    }

    #[test]
    fn center_random_row_sums_vanish() {
        let d = DataMatrix::new(random_matrix(4, 20, 1).scale(10.0).add_diag(3.0)).unwrap();
        let c = d.center();
        for i in 0..4 {
            // Direct summation oracle.
            let mut s = 0.0;
            for j in 0..20 {
                s += c.values()[(i, j)];
            }
            assert!(s.abs() < 1e-9, "row {i} sums to {s:e}");
        }
    }

    #[test]
    fn empty_data_is_rejected() {
        assert!(matches!(DataMatrix::new(Matrix::zeros(0, 3)), Err(Error::Argument(_))));
        assert!(matches!(DataMatrix::from_samples(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn second_moment_examples() {
        let z = DataMatrix::from_samples(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(z.second_moment(), Err(Error::State(_))));
        let r = z.center().second_moment().unwrap();
        assert_eq!(r, Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap());

        // Orthogonal unit columns scaled by √N, plus their negatives so the
        // mean is zero: identity on their span.
        let s = 4f64.sqrt();
        let z = DataMatrix::from_samples(&[
            vec![s, 0.0, 0.0],
            vec![0.0, s, 0.0],
            vec![-s, 0.0, 0.0],
            vec![0.0, -s, 0.0],
        ])
        .unwrap();
        let r = z.center().second_moment().unwrap();
        assert_eq!(r, Matrix::from_diag(&[2.0, 2.0, 0.0]));
    }

    #[test]
    fn second_moment_matches_triple_loop() {
        let d = DataMatrix::new(random_matrix(3, 50, 2)).unwrap().center();
        let r = d.second_moment().unwrap();
        let z = d.values();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for n in 0..50 {
                    s += z[(i, n)] * z[(j, n)];
                }
                assert!((r[(i, j)] - s / 50.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn equal_partitions_give_equal_covariances() {
        let d = DataMatrix::new(random_matrix(4, 30, 5)).unwrap();
        let pair = build_covariance_pair(&d, &d).unwrap();
        assert_eq!(pair.r_b, pair.r_f);
        assert_eq!(pair.loading, 0.0);
    }

    #[test]
    fn rank_deficient_background_is_loaded() {
        let bg = DataMatrix::new(random_matrix(6, 4, 1)).unwrap();
        let fg = DataMatrix::new(random_matrix(6, 40, 2)).unwrap();
        let pair = build_covariance_pair(&bg, &fg).unwrap();
        // Four centered samples span at most three dimensions.
        let eig = sym_eig(&pair.r_b).unwrap();
        assert!(eig.values[3].abs() < 1e-12 * eig.values[0]);
        assert!(pair.loading > 0.0);
        let bad = DataMatrix::new(random_matrix(5, 4, 1)).unwrap();
        assert!(matches!(build_covariance_pair(&bad, &fg), Err(Error::Shape(_))));
    }
}
