//! Small dense helpers shared by the Riccati solver and its checks.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, SVD};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

pub type Mat = DMatrix<f64>;

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).abs().max() <= tol * m.abs().max().max(1.0)
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone().lu().try_inverse().ok_or(Error::Singular)
}

/// `ln |det m|` from the LU factors, robust against overflow.
pub fn log_abs_det(m: &Mat) -> Result<f64> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Singular);
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Solves `A^T X + X A + C = 0` by the Kronecker-product linear system.
///
/// Sized for state dimensions up to a few tens; the system is `n^2 x n^2`.
pub fn solve_lyapunov(a: &Mat, c: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if !a.is_square() || c.shape() != (n, n) {
        return Err(Error::Dimension(format!("Lyapunov: A is {:?}, C is {:?}", a.shape(), c.shape())));
    }
    let eye = Mat::identity(n, n);
    let at = a.transpose();
    // column-major vec: vec(A^T X) = (I (x) A^T) vec X, vec(X A) = (A^T (x) I) vec X
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let x = op.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(symmetrize(&Mat::from_column_slice(n, n, x.as_slice())))
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn max_real_part(eigs: &[Complex<f64>]) -> f64 {
    eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Numerical rank from singular values relative to the largest one.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Mat::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    out
}

/// Popov-Belevitch-Hautus test: `[A - lambda I, B]` has full row rank for every
/// eigenvalue of `A` with non-negative real part.
pub fn pbh_stabilizable(a: &Mat, b: &Mat, tol: f64) -> bool {
    let n = a.nrows();
    let scale = a.abs().max().max(b.abs().max()).max(1.0);
    for lambda in eigenvalues(a) {
        if lambda.re < -tol * scale {
            continue;
        }
        let mut m = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex::new(a[(i, j)], 0.0) - if i == j { lambda } else { Complex::new(0.0, 0.0) };
            }
            for j in 0..b.ncols() {
                m[(i, n + j)] = Complex::new(b[(i, j)], 0.0);
            }
        }
        let sv = SVD::new(m, false, false).singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin <= 1e-10 * scale {
            return false;
        }
    }
    true
}

/// Dual PBH test for `(A, C)` detectability, with `C` any factor of `Q`'s range.
pub fn pbh_detectable(a: &Mat, c: &Mat, tol: f64) -> bool {
    pbh_stabilizable(&a.transpose(), &c.transpose(), tol)
}
