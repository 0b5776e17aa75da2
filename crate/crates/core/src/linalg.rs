//! Small dense helpers shared by the regression and survival fitters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` for symmetric positive (semi)definite `a`. Falls back to
/// one retry with `jitter` added on the diagonal when the factorization fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, jitter: f64) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let mut aj = a.clone();
    for i in 0..aj.nrows() {
        aj[(i, i)] += jitter;
    }
    aj.cholesky().map(|ch| ch.solve(b)).ok_or(Error::Singular)
}

pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or(Error::Singular)
}

/// Minimum-norm solution of `a x = b` for symmetric positive semidefinite
/// `a`; directions with eigenvalue below `rel_tol * max eigenvalue` are
/// ignored.
pub fn solve_psd_pinv(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    pinv_psd(a, rel_tol).map(|p| p * b)
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite matrix.
pub fn pinv_psd(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !top.is_finite() {
        return Err(Error::Singular);
    }
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > rel_tol * top && l > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / l;
        }
    }
    Ok(out)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns
/// of a row-major `n x n` matrix, unsorted. Sweeps stop once the largest
/// off-diagonal magnitude drops below `tol`.
pub fn jacobi_eigen(sym: &[Vec<f64>], tol: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = sym.len();
    let mut a: Vec<Vec<f64>> = sym.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i][j].abs());
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}
