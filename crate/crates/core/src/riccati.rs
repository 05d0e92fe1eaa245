//! Continuous-time algebraic Riccati equation
//!
//! ```text
//! A^T P + P A - P B R^{-1} B^T P + Q = 0
//! ```
//!
//! The stabilizing solution spans the stable invariant subspace of the
//! Hamiltonian
//!
//! ```text
//! H = [  A   -B R^{-1} B^T ]
//!     [ -Q   -A^T          ]
//! ```
//!
//! That subspace is extracted with the scaled matrix-sign iteration
//! (`sign(H)` acts as `-I` on it), after which a few Newton-Kleinman
//! corrections polish `P` down to the residual floor.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Complex, SVD};
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{self, Mat};
use crate::{Error, Result};

/// Cap on sign-function iterations.
pub const MAX_SIGN_ITERATIONS: usize = 100;
/// Cap on Newton-Kleinman refinement steps.
pub const MAX_NEWTON_STEPS: usize = 6;
/// Hamiltonian eigenvalues with `|Re| <= IMAG_AXIS_TOL * max(1, |lambda|)` are
/// treated as lying on the imaginary axis.
pub const IMAG_AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: Mat,
    /// `R^{-1} B^T P`
    pub k: Mat,
    /// Eigenvalues of `A - B K`.
    pub closed_loop_eigs: Vec<Complex<f64>>,
    /// Normwise relative residual
    /// `||Res||_F / (||A^T P||_F + ||P A||_F + ||P G P||_F + ||Q||_F)` with
    /// `G = B R^{-1} B^T`. It measures solver accuracy independent of the
    /// conditioning of the problem.
    pub residual: f64,
    /// `||Res||_F / ||Q||_F`, which also grows with `||P||^2 ||G||` on
    /// ill-conditioned problems.
    pub residual_q: f64,
    pub sign_iterations: usize,
    pub newton_steps: usize,
}

/// Absolute CARE residual matrix.
pub fn care_residual(a: &Mat, g: &Mat, q: &Mat, p: &Mat) -> Mat {
    a.transpose() * p + p * a - p * g * p + q
}

fn check_inputs(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Dimension(format!("A must be square, got {:?}", a.shape())));
    }
    if b.nrows() != n || b.ncols() == 0 {
        return Err(Error::Dimension(format!("B must be {n} x m, got {:?}", b.shape())));
    }
    let m = b.ncols();
    if q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!("Q must be {n}x{n} and R {m}x{m}")));
    }
    let finite = |x: &Mat| x.iter().all(|v| v.is_finite());
    if !(finite(a) && finite(b) && finite(q) && finite(r)) {
        return Err(Error::NonFinite);
    }
    if !linalg::is_symmetric(q, 1e-12) || !linalg::is_symmetric(r, 1e-12) {
        return Err(Error::InvalidParameter("Q and R must be symmetric".into()));
    }
    if r.clone().cholesky().is_none() {
        return Err(Error::InvalidParameter("R must be positive definite".into()));
    }
    let qmin = q.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if qmin < -1e-12 * q.abs().max().max(1e-300) {
        return Err(Error::InvalidParameter(format!("Q must be positive semi-definite (min eigenvalue {qmin:e})")));
    }
    Ok(())
}

fn stabilizable(a: &Mat, b: &Mat) -> bool {
    let n = a.nrows();
    linalg::rank(&linalg::controllability_matrix(a, b), 1e-12) == n || linalg::pbh_stabilizable(a, b, 1e-9)
}

fn detectable(a: &Mat, q: &Mat) -> bool {
    let n = a.nrows();
    let at = a.transpose();
    linalg::rank(&linalg::controllability_matrix(&at, q), 1e-12) == n || linalg::pbh_detectable(a, q, 1e-9)
}

/// Scaled Newton iteration `Z <- (c Z + (c Z)^{-1}) / 2` for the matrix sign.
fn matrix_sign(h: &Mat) -> Result<(Mat, usize)> {
    let dim = h.nrows() as f64;
    let mut z = h.clone();
    let mut scaling = true;
    for it in 1..=MAX_SIGN_ITERATIONS {
        let c = if scaling { (-linalg::log_abs_det(&z)? / dim).exp() } else { 1.0 };
        let zi = linalg::inverse(&z)?;
        let next = (&z * c + zi / c) * 0.5;
        let rel = (&next - &z).norm() / next.norm();
        z = next;
        if !rel.is_finite() {
            return Err(Error::NonFinite);
        }
        if rel < 1e-2 {
            scaling = false;
        }
        if rel < 1e-13 {
            return Ok((z, it));
        }
    }
    Err(Error::NoConvergence { what: "matrix sign iteration", iterations: MAX_SIGN_ITERATIONS })
}

/// Stabilizing solution of the CARE.
///
/// Preflight checks: square/compatible shapes, `Q = Q^T >= 0`, `R = R^T > 0`,
/// `(A, B)` stabilizable, `(A, Q)` detectable, and no Hamiltonian eigenvalue on
/// the imaginary axis.
pub fn solve_care(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<CareSolution> {
    check_inputs(a, b, q, r)?;
    let n = a.nrows();
    if !stabilizable(a, b) {
        return Err(Error::NotStabilizable);
    }
    if !detectable(a, q) {
        return Err(Error::NotDetectable);
    }

    let r_chol = r.clone().cholesky().ok_or(Error::Singular)?;
    let rinv_bt = r_chol.solve(&b.transpose());
    let g = linalg::symmetrize(&(b * &rinv_bt));

    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    for lambda in linalg::eigenvalues(&h) {
        if lambda.re.abs() <= IMAG_AXIS_TOL * lambda.norm().max(1.0) {
            return Err(Error::ImaginaryAxisEigenvalue { re: lambda.re.abs() });
        }
    }

    let (w, sign_iterations) = matrix_sign(&h)?;
    // (sign(H) + I) [I; P] = 0, solved in the least-squares sense
    let eye = Mat::identity(n, n);
    let mut lhs = Mat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = Mat::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let p0 = SVD::new(lhs, true, true).solve(&rhs, 1e-14).map_err(|_| Error::Singular)?;
    let mut p = linalg::symmetrize(&p0);

    let qn = q.norm();
    let scale = if qn > 0.0 { qn } else { p.norm().max(1.0) };
    let mut res = care_residual(a, &g, q, &p);
    let mut best = res.norm();
    let mut newton_steps = 0;
    for _ in 0..MAX_NEWTON_STEPS {
        if best / scale < 1e-15 {
            break;
        }
        let ak = a - &g * &p;
        let delta = match linalg::solve_lyapunov(&ak, &res) {
            Ok(d) => d,
            Err(_) => break,
        };
        let candidate = linalg::symmetrize(&(&p + delta));
        let cand_res = care_residual(a, &g, q, &candidate);
        let cand_norm = cand_res.norm();
        if !(cand_norm < best) {
            break;
        }
        let improved_enough = cand_norm < 0.5 * best;
        p = candidate;
        res = cand_res;
        best = cand_norm;
        newton_steps += 1;
        if !improved_enough {
            break;
        }
    }

    let k = r_chol.solve(&(b.transpose() * &p));
    let closed_loop_eigs = linalg::eigenvalues(&(a - b * &k));
    let max_re = linalg::max_real_part(&closed_loop_eigs);
    if !(max_re < 0.0) {
        return Err(Error::NotHurwitz { max_re });
    }
    let terms = (a.transpose() * &p).norm() + (&p * a).norm() + (&p * &g * &p).norm() + qn;
    let residual = if terms > 0.0 { best / terms } else { 0.0 };
    Ok(CareSolution { p, k, closed_loop_eigs, residual, residual_q: best / scale, sign_iterations, newton_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn scalar_care() {
        let s = solve_care(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0])).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() <= 1e-10);
        assert!((s.k[(0, 0)] - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn double_integrator_care() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let s = solve_care(&a, &b, &Mat::identity(2, 2), &m(1, 1, &[1.0])).unwrap();
        let r3 = 3f64.sqrt();
        let expected = m(2, 2, &[r3, 1.0, 1.0, r3]);
        assert!((&s.p - expected).abs().max() <= 1e-10);
        assert!((s.k[(0, 0)] - 1.0).abs() <= 1e-10 && (s.k[(0, 1)] - r3).abs() <= 1e-10);
        for l in &s.closed_loop_eigs {
            assert!((l.re + r3 / 2.0).abs() < 1e-10 && (l.im.abs() - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_unstabilizable_pair() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let err = solve_care(&a, &b, &Mat::identity(2, 2), &m(1, 1, &[1.0])).unwrap_err();
        assert_eq!(err, Error::NotStabilizable);
    }

    #[test]
    fn rejects_undetectable_pair() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = Mat::identity(2, 2);
        let q = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(solve_care(&a, &b, &q, &Mat::identity(2, 2)).unwrap_err(), Error::NotDetectable);
    }

    #[test]
    fn rejects_imaginary_axis_hamiltonian() {
        // undamped oscillator with zero state weight: eigenvalues +-i persist in H
        let a = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let q = m(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        let err = solve_care(&a, &b, &q, &m(1, 1, &[1.0])).unwrap_err();
        assert!(matches!(err, Error::NotDetectable | Error::ImaginaryAxisEigenvalue { .. }), "{err:?}");
    }

    #[test]
    fn rejects_indefinite_r() {
        let a = m(1, 1, &[0.0]);
        let b = m(1, 1, &[1.0]);
        assert!(matches!(solve_care(&a, &b, &m(1, 1, &[1.0]), &m(1, 1, &[0.0])), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn random_systems_meet_residual_and_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.random_range(1..=10);
            let mm = rng.random_range(1..=n.min(4));
            let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let b = Mat::from_fn(n, mm, |_, _| rng.random_range(-1.0..1.0));
            let c = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let q = c.transpose() * &c + Mat::identity(n, n) * 1e-3;
            let d = Mat::from_fn(mm, mm, |_, _| rng.random_range(-1.0..1.0));
            let r = d.transpose() * &d + Mat::identity(mm, mm) * 0.5;
            let s = solve_care(&a, &b, &q, &r).unwrap();
            assert!(s.residual <= 1e-8, "n={n} residual {}", s.residual);
            assert!(linalg::max_real_part(&s.closed_loop_eigs) < 0.0);
        }
    }
}
