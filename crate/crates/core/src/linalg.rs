//! Hermitian eigenproblems by cyclic complex Jacobi rotations.
//!
//! Each rotation `U` acts on a pivot pair `(p, q)`: a diagonal phase first
//! makes `a_pq` real and nonnegative, then a real Givens rotation annihilates
//! it. `A ← U*AU` and `V ← VU` are applied in place.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Inputs whose `‖A − A*‖_F / max(1, ‖A‖_F)` exceeds this are rejected.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Sweeps stop once the off-diagonal Frobenius norm is below this fraction of
/// `‖A‖_F`.
pub const OFFDIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

fn check_hermitian(a: &DMatrix<Complex64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Format(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    let norm = a.norm();
    let dev = (a - a.adjoint()).norm() / norm.max(1.0);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(norm)
}

fn off_diagonal_norm(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending; column `k` of the
/// returned matrix is the unit eigenvector of eigenvalue `k`.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let norm = check_hermitian(m)?;
    let n = m.nrows();
    // symmetrize so rounding in the input cannot bias the rotations
    let mut a = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let target = OFFDIAG_TOL * norm;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

fn rotate(a: &mut DMatrix<Complex64>, v: &mut DMatrix<Complex64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = Complex64::new(0.0, 0.0);
        a[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    // e^{-iφ} with a_pq = r·e^{iφ}
    let phase = apq.conj() / r;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = phase * (-s);
    let uqq = phase * c;

    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * upp + akq * uqp;
        a[(k, q)] = akp * upq + akq * uqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
        a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(m)?.0)
}

/// Singular values of an arbitrary square matrix, ascending, via the
/// eigenvalues of `M*M`.
pub fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let g = m.adjoint() * m;
    Ok(hermitian_eigenvalues(&g)?.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// `max ‖Mv − λv‖` over the computed pairs.
pub fn max_residual(m: &DMatrix<Complex64>, values: &[f64], vectors: &DMatrix<Complex64>) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let col = vectors.column(k);
            (m * col - col * Complex64::new(l, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// Greedy matching of two sorted multisets with tolerance
/// `tol·max(1, |value|)`; returns the first mismatching pair, if any.
pub fn match_sorted(a: &[f64], b: &[f64], tol: f64) -> std::result::Result<(), (usize, f64, f64)> {
    if a.len() != b.len() {
        let i = a.len().min(b.len());
        return Err((i, a.get(i).copied().unwrap_or(f64::NAN), b.get(i).copied().unwrap_or(f64::NAN)));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if (x - y).abs() > tol * x.abs().max(y.abs()).max(1.0) {
            return Err((i, *x, *y));
        }
    }
    Ok(())
}
