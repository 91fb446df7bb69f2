//! Symmetric eigendecomposition.
//!
//! Matrices up to [`JACOBI_MAX_DIM`] use cyclic Jacobi rotations; larger ones
//! are reduced to tridiagonal form with Householder reflections and finished
//! with implicit-shift QL. Both paths are capped at `100·n` sweeps
//! (respectively QL iterations).
//!
//! Every call to [`sym_eig`] bumps a per-thread counter so callers can verify
//! how many decompositions an algorithm performs; see
//! [`count_decompositions`].

use std::cell::Cell;

use super::matrix::{norm2, Matrix};
use crate::error::{Error, Result};

/// Largest dimension handled by the Jacobi path.
pub const JACOBI_MAX_DIM: usize = 32;

/// Relative symmetry tolerance accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-9;

thread_local! {
    static DECOMPOSITIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of symmetric eigendecompositions performed on this thread so far.
pub fn decomposition_count() -> usize {
    DECOMPOSITIONS.with(Cell::get)
}

/// Runs `f` and reports how many eigendecompositions it performed on the
/// calling thread.
pub fn count_decompositions<R>(f: impl FnOnce() -> R) -> (R, usize) {
    let before = decomposition_count();
    let out = f();
    (out, decomposition_count() - before)
}

/// Like [`count_decompositions`], but leaves this thread's counter unchanged.
/// Used by parallel code that re-credits the total to the caller.
pub(crate) fn detach_decompositions<R>(f: impl FnOnce() -> R) -> (R, usize) {
    let before = decomposition_count();
    let out = f();
    let after = decomposition_count();
    DECOMPOSITIONS.with(|c| c.set(before));
    (out, after - before)
}

/// Credits decompositions performed elsewhere (e.g. on worker threads) to
/// the calling thread's counter.
pub(crate) fn credit_decompositions(n: usize) {
    DECOMPOSITIONS.with(|c| c.set(c.get() + n));
}

/// Eigenpairs sorted by non-increasing eigenvalue.
///
/// Column `i` of `vectors` has unit norm and pairs with `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// Keeps only the leading `k` eigenpairs.
    pub fn truncate(mut self, k: usize) -> Self {
        self.values.truncate(k);
        self.vectors = self.vectors.leading_columns(k);
        self
    }
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Eigenvalues are returned in descending order (ties keep the solver's
/// original order). Each eigenvector is flipped so its largest-magnitude
/// component is positive, ties going to the lowest index.
pub fn sym_eig(a: &Matrix) -> Result<EigenResult> {
    check_symmetric(a)?;
    DECOMPOSITIONS.with(|c| c.set(c.get() + 1));

    let n = a.rows();
    if n == 0 {
        return Ok(EigenResult {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let (values, vecs_by_row) = if n <= JACOBI_MAX_DIM {
        jacobi(a)?
    } else {
        tridiagonal_ql(a)?
    };
    Ok(assemble(values, vecs_by_row, n))
}

pub(crate) fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOL * a.max_abs() {
        return Err(Error::shape(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    Ok(())
}

/// Sorts, normalizes and sign-fixes eigenvectors given as rows.
fn assemble(values: Vec<f64>, mut vecs: Vec<Vec<f64>>, n: usize) -> EigenResult {
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal eigenvalues keep their original index order.
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let mut sorted_values = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = &mut vecs[src];
        let norm = norm2(v);
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        apply_sign_convention(v);
        vectors.set_column(col, v);
        sorted_values.push(values[src]);
    }
    EigenResult {
        values: sorted_values,
        vectors,
    }
}

/// Flips `v` so that its largest-magnitude entry is positive. Entries within
/// a relative `1e-12` of the maximum count as ties; the lowest index wins.
pub fn apply_sign_convention(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Cyclic Jacobi. Returns eigenvalues and eigenvectors (one per row).
pub(crate) fn jacobi(a: &Matrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    // vt[k] is the k-th eigenvector.
    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        })
        .collect();
    let scale = m.frobenius_norm();
    let cap = 100 * n;

    let mut converged = scale == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == cap {
            return Err(Error::Convergence(cap));
        }
        sweep += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                if apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt()
                    || apq.abs() <= 1e-4 * f64::EPSILON * scale
                {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                let (lo, hi) = vt.split_at_mut(q);
                for (vp, vq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (x, y) = (*vp, *vq);
                    *vp = c * x - s * y;
                    *vq = s * x + c * y;
                }
            }
        }
        converged = !rotated;
    }
    Ok((m.diag(), vt))
}

/// Householder tridiagonalization followed by implicit-shift QL.
/// Returns eigenvalues and eigenvectors (one per row).
pub(crate) fn tridiagonal_ql(a: &Matrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.rows();
    let mut work = a.clone();
    work.symmetrize();
    let reflectors = householder_tridiagonalize(&mut work);

    let mut diag = work.diag();
    let mut sub = vec![0.0; n];
    for i in 0..n - 1 {
        sub[i] = work[(i + 1, i)];
    }

    // q = H_0 H_1 ... H_{n-3}, accumulated backwards; rows of the
    // transposed product become the eigenvector rows the QL rotations act on.
    let mut q = Matrix::identity(n);
    for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
        let start = k + 1;
        // w = vᵀ Q[start.., :]
        let mut w = vec![0.0; n];
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (wi, &qi) in w.iter_mut().zip(q.row(start + r)) {
                    *wi += vr * qi;
                }
            }
        }
        for (r, &vr) in v.iter().enumerate() {
            let f = beta * vr;
            if f != 0.0 {
                for (qi, &wi) in q.row_mut(start + r).iter_mut().zip(&w) {
                    *qi -= f * wi;
                }
            }
        }
    }
    let qt = q.transpose();
    let mut vt: Vec<Vec<f64>> = (0..n).map(|i| qt.row(i).to_vec()).collect();

    implicit_ql(&mut diag, &mut sub, &mut vt)?;
    Ok((diag, vt))
}

/// Reduces `a` in place to tridiagonal form. Returns the Householder vectors
/// (for step `k`, supported on indices `k+1..n`) and their `β` factors.
fn householder_tridiagonalize(a: &mut Matrix) -> Vec<(Vec<f64>, f64)> {
    let n = a.rows();
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let m = n - start;
        let mut v: Vec<f64> = (start..n).map(|i| a[(i, k)]).collect();
        let tail: f64 = v[1..].iter().map(|x| x * x).sum();
        if tail == 0.0 {
            reflectors.push((vec![0.0; m], 0.0));
            continue;
        }
        let norm = (v[0] * v[0] + tail).sqrt();
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let beta = 2.0 / (v[0] * v[0] + tail);

        a[(start, k)] = alpha;
        a[(k, start)] = alpha;
        for i in (start + 1)..n {
            a[(i, k)] = 0.0;
            a[(k, i)] = 0.0;
        }

        // p = β·S·v on the trailing block S.
        let mut p = vec![0.0; m];
        for (r, pr) in p.iter_mut().enumerate() {
            let row = &a.row(start + r)[start..];
            *pr = beta * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        let kf = 0.5 * beta * p.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kf * vi).collect();
        for r in 0..m {
            let (vr, wr) = (v[r], w[r]);
            let row = &mut a.row_mut(start + r)[start..];
            for ((x, &vc), &wc) in row.iter_mut().zip(&v).zip(&w) {
                *x -= vr * wc + wr * vc;
            }
        }
        reflectors.push((v, beta));
    }
    reflectors
}

/// Implicit QL on a symmetric tridiagonal matrix (`diag`, `sub[i] = T[i+1][i]`).
/// Rotations are applied to rows `i`, `i+1` of `vt`.
fn implicit_ql(diag: &mut [f64], sub: &mut [f64], vt: &mut [Vec<f64>]) -> Result<()> {
    let n = diag.len();
    let cap = 100 * n;
    let mut iterations = 0;
    let eps = f64::EPSILON;
    let mut shift_acc = 0.0;
    let mut tst1 = 0.0f64;
    sub[n - 1] = 0.0;

    for l in 0..n {
        tst1 = tst1.max(diag[l].abs() + sub[l].abs());
        let mut m = l;
        while m < n - 1 && sub[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > cap {
                    return Err(Error::Convergence(cap));
                }
                let g = diag[l];
                let mut p = (diag[l + 1] - g) / (2.0 * sub[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                diag[l] = sub[l] / (p + r);
                diag[l + 1] = sub[l] * (p + r);
                let dl1 = diag[l + 1];
                let mut h = g - diag[l];
                for d in diag.iter_mut().skip(l + 2) {
                    *d -= h;
                }
                shift_acc += h;

                p = diag[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = sub[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * sub[i];
                    h = c * p;
                    r = p.hypot(sub[i]);
                    sub[i + 1] = s * r;
                    s = sub[i] / r;
                    c = p / r;
                    p = c * diag[i] - s * g;
                    diag[i + 1] = h + s * (c * g + s * diag[i]);

                    let (lo, hi) = vt.split_at_mut(i + 1);
                    for (vi, vi1) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                        let t = *vi1;
                        *vi1 = s * *vi + c * t;
                        *vi = c * *vi - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * sub[l] / dl1;
                sub[l] = s * p;
                diag[l] = c * p;
                if sub[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        diag[l] += shift_acc;
        sub[l] = 0.0;
    }
    Ok(())
}
