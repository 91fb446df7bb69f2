//! PCA, cPCA and cPCA++ filter banks.
//!
//! * PCA keeps the top eigenvectors of the foreground covariance.
//! * cPCA keeps the top (signed) eigenvectors of `R_f − α·R_b` for a given
//!   contrast `α`, so finding a good `α` takes one decomposition per
//!   candidate.
//! * cPCA++ keeps the top eigenvectors of `Q = R_b⁻¹·R_f` and needs no
//!   contrast parameter: one decomposition total.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    credit_decompositions, detach_decompositions, q_eig, sym_eig, EigenResult, Matrix,
};
use crate::stats::{CovariancePair, DataMatrix};

/// Number of log-spaced points in [`default_alpha_grid`] (plus `α = 0`).
pub const DEFAULT_GRID_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pca,
    Cpca,
    CpcaPlusPlus,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::Cpca => "cpca",
            Method::CpcaPlusPlus => "cpca++",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "cpca" => Ok(Method::Cpca),
            "cpca++" => Ok(Method::CpcaPlusPlus),
            other => Err(Error::arg(format!(
                "unknown method {other:?} (expected pca, cpca or cpca++)"
            ))),
        }
    }
}

/// A learned `M×K` transform plus the statistics needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub method: Method,
    /// Filters as unit-norm columns.
    pub f: Matrix,
    /// Eigenvalues paired with the columns of `f`, descending.
    pub eigenvalues: Vec<f64>,
    pub train_mean_bg: Vec<f64>,
    pub train_mean_fg: Vec<f64>,
    /// Contrast parameter; present iff `method == Cpca`.
    pub alpha: Option<f64>,
    /// Diagonal loading that was applied to `R_b`.
    pub loading: f64,
}

impl FilterBank {
    pub fn features(&self) -> usize {
        self.f.rows()
    }

    pub fn k(&self) -> usize {
        self.f.cols()
    }

    /// Filter `i` as a vector.
    pub fn filter(&self, i: usize) -> Vec<f64> {
        self.f.column(i)
    }

    /// Checks the structural invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let (m, k) = self.f.shape();
        if k == 0 || k > m {
            return Err(Error::shape(format!("filter bank is {m}x{k}")));
        }
        if self.eigenvalues.len() != k
            || self.train_mean_bg.len() != m
            || self.train_mean_fg.len() != m
        {
            return Err(Error::shape("filter bank vector lengths disagree with F"));
        }
        if self.eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::State("eigenvalues are not descending".to_string()));
        }
        if self.alpha.is_some() != (self.method == Method::Cpca) {
            return Err(Error::State("alpha must be present exactly for cpca".to_string()));
        }
        Ok(())
    }
}

/// Which offset [`transform_with`] subtracts from uncentered data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// The batch's own per-feature mean.
    #[default]
    Batch,
    /// The foreground mean recorded at training time.
    TrainingForeground,
}

/// Projected samples, `K×N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub y: Matrix,
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::arg(format!("k must lie in 1..={m}, got {k}")));
    }
    Ok(())
}

fn bank_from(
    method: Method,
    eig: EigenResult,
    k: usize,
    mean_bg: Vec<f64>,
    mean_fg: Vec<f64>,
    alpha: Option<f64>,
    loading: f64,
) -> FilterBank {
    let eig = eig.truncate(k);
    FilterBank {
        method,
        f: eig.vectors,
        eigenvalues: eig.values,
        train_mean_bg: mean_bg,
        train_mean_fg: mean_fg,
        alpha,
        loading,
    }
}

/// Principal components of `data` (centered with its own mean).
pub fn fit_pca(data: &DataMatrix, k: usize) -> Result<FilterBank> {
    check_k(k, data.features())?;
    if data.samples() < 2 {
        return Err(Error::arg("PCA needs at least two samples"));
    }
    let z = data.center();
    let r = z.second_moment()?;
    let mean = z.mean().map(<[f64]>::to_vec).unwrap_or_default();
    let eig = sym_eig(&r)?;
    Ok(bank_from(Method::Pca, eig, k, mean.clone(), mean, None, 0.0))
}

/// Contrastive PCA at a single contrast `alpha ≥ 0`.
pub fn fit_cpca(pair: &CovariancePair, k: usize, alpha: f64) -> Result<FilterBank> {
    check_k(k, pair.features())?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::arg(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let mut c = pair.r_f.sub(&pair.r_b.scale(alpha))?;
    c.symmetrize();
    let eig = sym_eig(&c)?;
    Ok(bank_from(
        Method::Cpca,
        eig,
        k,
        pair.mean_b.clone(),
        pair.mean_f.clone(),
        Some(alpha),
        0.0,
    ))
}

/// [`fit_cpca`] for every contrast in `alphas`, in order.
///
/// Contrasts are evaluated in parallel; each fit is independent, so results
/// do not depend on scheduling. The decompositions done on worker threads
/// are credited to the calling thread's counter.
pub fn sweep_cpca(pair: &CovariancePair, k: usize, alphas: &[f64]) -> Result<Vec<FilterBank>> {
    if alphas.is_empty() {
        return Err(Error::arg("alpha grid is empty"));
    }
    let fits: Vec<(Result<FilterBank>, usize)> = alphas
        .par_iter()
        .map(|&a| detach_decompositions(|| fit_cpca(pair, k, a)))
        .collect();
    credit_decompositions(fits.iter().map(|(_, n)| n).sum());
    fits.into_iter().map(|(bank, _)| bank).collect()
}

/// cPCA++: top-`k` eigenvectors of `(R_b + loading·I)⁻¹·R_f`.
pub fn fit_cpcapp(pair: &CovariancePair, k: usize) -> Result<FilterBank> {
    check_k(k, pair.features())?;
    let eig = q_eig(&pair.loaded_r_b(), &pair.r_f, k)?;
    Ok(bank_from(
        Method::CpcaPlusPlus,
        eig,
        k,
        pair.mean_b.clone(),
        pair.mean_f.clone(),
        None,
        pair.loading,
    ))
}

/// `{0}` followed by [`DEFAULT_GRID_POINTS`] log-spaced contrasts in
/// `[1e-3, 1e3]`.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend(log_grid(1e-3, 1e3, DEFAULT_GRID_POINTS));
    grid
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Parses an alpha grid: `default`, `log:LO:HI:N` (log-spaced, `0` not
/// included) or a comma-separated list.
pub fn parse_alpha_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec == "default" {
        return Ok(default_alpha_grid());
    }
    let bad = || Error::arg(format!("invalid alpha grid {spec:?}"));
    let grid = if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(bad());
        }
        log_grid(lo, hi, n)
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() || grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

/// `Y = Fᵀ·Z` with `Z` centered by the batch's own mean.
pub fn transform(bank: &FilterBank, data: &DataMatrix) -> Result<Projection> {
    transform_with(bank, data, Centering::Batch)
}

/// `Y = Fᵀ·Z`. Data that is already centered is used as is; otherwise it is
/// centered according to `centering`.
pub fn transform_with(
    bank: &FilterBank,
    data: &DataMatrix,
    centering: Centering,
) -> Result<Projection> {
    if data.features() != bank.features() {
        return Err(Error::shape(format!(
            "data has {} features, filter bank expects {}",
            data.features(),
            bank.features()
        )));
    }
    let z = match (data.is_centered(), centering) {
        (true, _) => data.clone(),
        (false, Centering::Batch) => data.center(),
        (false, Centering::TrainingForeground) => data.center_with(&bank.train_mean_fg),
    };
    Ok(Projection {
        y: bank.f.tr_matmul(z.values())?,
    })
}
