//! Hover linearization and infinite-horizon LQR gain synthesis.
//!
//! The controller state is
//! `sigma = (d_x, d_y, d_z, u, v, w, phi, theta, p, q)`: body-frame position,
//! body velocity, roll/pitch and the roll/pitch rates. Yaw and yaw rate are
//! not part of the regulator. The model inputs are wrench deviations from hover
//! `(dGamma, tau_r, tau_p)`.
//!
//! The stored gain follows the convention `dwrench = K (sigma_des - sigma)`
//! with `K = R^{-1} B^T P`, so positive entries push the state toward the
//! setpoint.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, SMatrix, SVector, Vector3};

use crate::dynamics::{hover_equilibrium, state_derivative, SimState, UnmodeledTerms};
use crate::kinematics::EulerAngles321;
use crate::linalg;
use crate::riccati;
use crate::vehicle::{VehicleParams, Wrench};
use crate::{Error, Result};

pub const STATE_DIM: usize = 10;
pub const INPUT_DIM: usize = 3;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;
/// `3 x 10` feedback gain in wrench units per state unit.
pub type GainMatrix = SMatrix<f64, INPUT_DIM, STATE_DIM>;

/// Names of the `sigma` entries, in order.
pub const STATE_NAMES: [&str; STATE_DIM] = ["d_x", "d_y", "d_z", "u", "v", "w", "phi", "theta", "p", "q"];

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: StateMatrix,
    pub b: InputMatrix,
    /// Wrench per volt on each input channel, carried so weights given in
    /// actuator volts can be mapped onto the wrench inputs.
    pub input_scale: [f64; 3],
}

impl LinearModel {
    pub fn controllability_rank(&self) -> usize {
        let a = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, self.a.as_slice());
        let b = DMatrix::from_column_slice(STATE_DIM, INPUT_DIM, self.b.as_slice());
        linalg::rank(&linalg::controllability_matrix(&a, &b), 1e-12)
    }
}

/// Units in which the input weight `R` is expressed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum InputUnits {
    /// `R` penalizes the actuator commands `(A, dA, Vo)` in volts.
    #[default]
    ActuatorVolts,
    /// `R` penalizes the wrench `(Gamma, tau_r, tau_p)` in N and N m directly.
    Wrench,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q: StateMatrix,
    pub r: SMatrix<f64, INPUT_DIM, INPUT_DIM>,
    pub input_units: InputUnits,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self::hover_default()
    }
}

impl LqrWeights {
    /// `Q = diag(0.02, 0.02, 0.01, 0.1, 0.1, 0.1, 1, 1, 4, 4)`, `R = diag(2, 1, 1)`
    /// on the actuator volts.
    pub fn hover_default() -> Self {
        Self::diagonal(&[0.02, 0.02, 0.01, 0.1, 0.1, 0.1, 1.0, 1.0, 4.0, 4.0], &[2.0, 1.0, 1.0])
    }

    pub fn diagonal(q: &[f64; STATE_DIM], r: &[f64; INPUT_DIM]) -> Self {
        Self {
            q: StateMatrix::from_diagonal(&StateVector::from_column_slice(q)),
            r: SMatrix::<f64, 3, 3>::from_diagonal(&Vector3::from_column_slice(r)),
            input_units: InputUnits::ActuatorVolts,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { q: self.q * alpha, r: self.r * alpha, input_units: self.input_units }
    }

    pub fn validate(&self) -> Result<()> {
        let q = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, self.q.as_slice());
        let r = DMatrix::from_column_slice(INPUT_DIM, INPUT_DIM, self.r.as_slice());
        if !linalg::is_symmetric(&q, 1e-12) || !linalg::is_symmetric(&r, 1e-12) {
            return Err(Error::InvalidParameter("Q and R must be symmetric".into()));
        }
        if q.symmetric_eigenvalues().iter().any(|&l| l < -1e-12 * self.q.abs().max().max(1e-300)) {
            return Err(Error::InvalidParameter("Q must be positive semi-definite".into()));
        }
        if r.cholesky().is_none() {
            return Err(Error::InvalidParameter("R must be positive definite".into()));
        }
        Ok(())
    }

    /// `R` re-expressed on the wrench inputs of `model`.
    fn input_weight_on_wrench(&self, model: &LinearModel) -> SMatrix<f64, 3, 3> {
        match self.input_units {
            InputUnits::Wrench => self.r,
            InputUnits::ActuatorVolts => {
                // u_wrench = S u_volts  =>  R_wrench = S^{-1} R S^{-1}
                let s_inv = SMatrix::<f64, 3, 3>::from_diagonal(&Vector3::new(
                    1.0 / model.input_scale[0],
                    1.0 / model.input_scale[1],
                    1.0 / model.input_scale[2],
                ));
                s_inv * self.r * s_inv
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LqrSolution {
    pub model: LinearModel,
    /// Riccati solution.
    pub p: StateMatrix,
    /// Gain on the wrench inputs.
    pub k: GainMatrix,
    pub closed_loop_eigs: Vec<Complex<f64>>,
    /// Normwise relative CARE residual, see [`riccati::CareSolution::residual`].
    pub care_residual: f64,
    /// Residual relative to `||Q||_F` alone.
    pub care_residual_q: f64,
}

impl LqrSolution {
    /// Gain expressed in actuator volts per state unit.
    pub fn gain_volts(&self) -> GainMatrix {
        let mut kv = self.k;
        for (i, s) in self.model.input_scale.iter().enumerate() {
            kv.row_mut(i).unscale_mut(*s);
        }
        kv
    }

    pub fn is_hurwitz(&self) -> bool {
        linalg::max_real_part(&self.closed_loop_eigs) < 0.0
    }
}

/// Analytic Jacobians of the reduced 10-state dynamics at hover.
pub fn linearize_hover(p: &VehicleParams) -> LinearModel {
    let mut a = StateMatrix::zeros();
    let mut b = InputMatrix::zeros();
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
    }
    a[(3, 7)] = p.gravity;
    a[(4, 6)] = -p.gravity;
    a[(6, 8)] = 1.0;
    a[(7, 9)] = 1.0;
    b[(5, 0)] = 1.0 / p.total_mass();
    b[(8, 1)] = 1.0 / p.inertia[0];
    b[(9, 2)] = 1.0 / p.inertia[1];
    LinearModel { a, b, input_scale: p.input_scale() }
}

/// Nonlinear reduced dynamics `sigma' = f(sigma, dwrench)` with yaw and yaw
/// rate pinned at zero and `d' = V_b`.
pub fn reduced_dynamics(p: &VehicleParams, sigma: &StateVector, dwrench: &Vector3<f64>) -> Result<StateVector> {
    let (_, hover) = hover_equilibrium(p);
    let s = SimState {
        pos: Vector3::new(sigma[0], sigma[1], sigma[2]),
        vel_body: Vector3::new(sigma[3], sigma[4], sigma[5]),
        euler: EulerAngles321::new(sigma[6], sigma[7], 0.0)?,
        rates: Vector3::new(sigma[8], sigma[9], 0.0),
    };
    let w = Wrench::new(hover.thrust + dwrench.x, dwrench.y, dwrench.z);
    let d = state_derivative(p, &s, &w, &UnmodeledTerms::ZERO, &Vector3::zeros())?;
    Ok(StateVector::from_column_slice(&[
        sigma[3],
        sigma[4],
        sigma[5],
        d.vel_body_dot.x,
        d.vel_body_dot.y,
        d.vel_body_dot.z,
        d.euler_dot.x,
        d.euler_dot.y,
        d.rates_dot.x,
        d.rates_dot.y,
    ]))
}

/// Central-difference Jacobians of [`reduced_dynamics`] at hover.
pub fn finite_diff_jacobian(p: &VehicleParams, h: f64) -> Result<LinearModel> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::InvalidParameter(alloc::format!("finite-difference step {h} outside [1e-8, 1e-4]")));
    }
    let zero_u = Vector3::zeros();
    let mut a = StateMatrix::zeros();
    for j in 0..STATE_DIM {
        let mut e = StateVector::zeros();
        e[j] = h;
        let col = (reduced_dynamics(p, &e, &zero_u)? - reduced_dynamics(p, &(-e), &zero_u)?) / (2.0 * h);
        a.set_column(j, &col);
    }
    let mut b = InputMatrix::zeros();
    let sigma0 = StateVector::zeros();
    for j in 0..INPUT_DIM {
        let mut e = Vector3::zeros();
        e[j] = h;
        let col = (reduced_dynamics(p, &sigma0, &e)? - reduced_dynamics(p, &sigma0, &(-e))?) / (2.0 * h);
        b.set_column(j, &col);
    }
    Ok(LinearModel { a, b, input_scale: p.input_scale() })
}

/// Solves the CARE for `model` and returns the wrench-input gain.
///
/// Both weights are divided by the largest entry of `Q` first (of `R` when `Q`
/// is zero), so the gain does not depend on a joint rescaling of `Q` and `R`.
/// `P` is returned in the caller's cost units.
pub fn solve_care(model: &LinearModel, wts: &LqrWeights) -> Result<LqrSolution> {
    wts.validate()?;
    let q_max = wts.q.abs().max();
    let norm = if q_max > 0.0 { q_max } else { wts.r.abs().max() };
    // normalize before the unit change so jointly scaled weights reach the
    // solver as identical numbers
    let scaled = LqrWeights { q: wts.q / norm, r: wts.r / norm, input_units: wts.input_units };
    let r_w = scaled.input_weight_on_wrench(model);
    let to_dyn = |m: &[f64], r: usize, c: usize| DMatrix::from_column_slice(r, c, m);
    let q = to_dyn(scaled.q.as_slice(), STATE_DIM, STATE_DIM);
    let r = to_dyn(r_w.as_slice(), INPUT_DIM, INPUT_DIM);
    let a = to_dyn(model.a.as_slice(), STATE_DIM, STATE_DIM);
    let b = to_dyn(model.b.as_slice(), STATE_DIM, INPUT_DIM);
    let sol = riccati::solve_care(&a, &b, &q, &r)?;
    Ok(LqrSolution {
        model: model.clone(),
        p: StateMatrix::from_column_slice(sol.p.as_slice()) * norm,
        k: GainMatrix::from_column_slice(sol.k.as_slice()),
        closed_loop_eigs: sol.closed_loop_eigs,
        care_residual: sol.residual,
        care_residual_q: sol.residual_q,
    })
}

/// [`linearize_hover`] followed by [`solve_care`].
pub fn lqr_gain(p: &VehicleParams, wts: &LqrWeights) -> Result<LqrSolution> {
    p.validate()?;
    solve_care(&linearize_hover(p), wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::default_robofly_params;
    use approx::assert_relative_eq;

    #[test]
    fn analytic_entries() {
        let p = default_robofly_params();
        let m = linearize_hover(&p);
        assert_eq!(m.a[(3, 7)], 9.81);
        assert_relative_eq!(m.b[(8, 1)], 1.0 / 3.12e-9, max_relative = 1e-15);
        assert_relative_eq!(m.b[(8, 1)], 3.2051e8, max_relative = 1e-4);
        for j in 0..STATE_DIM {
            if j != 5 {
                assert_eq!(m.a[(2, j)], 0.0);
            }
        }
        assert_eq!(m.a[(2, 5)], 1.0);
        assert_eq!(m.controllability_rank(), 10);
    }

    #[test]
    fn finite_differences_match_analytic() {
        let p = default_robofly_params();
        let an = linearize_hover(&p);
        let fd = finite_diff_jacobian(&p, 1e-6).unwrap();
        for (x, y) in an.a.iter().zip(fd.a.iter()).chain(an.b.iter().zip(fd.b.iter())) {
            if *x != 0.0 {
                assert!(((x - y) / x).abs() <= 1e-6, "{x} vs {y}");
            } else {
                assert!(y.abs() <= 1e-8, "expected 0, finite difference gave {y}");
            }
        }
        assert!(finite_diff_jacobian(&p, 1e-3).is_err());
    }

    #[test]
    fn default_gain_is_stabilizing_and_decoupled() {
        let p = default_robofly_params();
        let sol = lqr_gain(&p, &LqrWeights::hover_default()).unwrap();
        assert!(sol.is_hurwitz());
        assert!(sol.care_residual <= 1e-8, "{}", sol.care_residual);
        let thrust = [2, 5];
        let roll = [1, 4, 6, 8];
        let pitch = [0, 3, 7, 9];
        for (row, allowed) in [(0usize, &thrust[..]), (1, &roll[..]), (2, &pitch[..])] {
            for j in 0..STATE_DIM {
                if !allowed.contains(&j) {
                    assert!(sol.k[(row, j)].abs() <= 1e-10, "K[{row},{j}] = {}", sol.k[(row, j)]);
                } else {
                    assert!(sol.k[(row, j)].abs() > 1e-12);
                }
            }
        }
        // climbing toward a setpoint above needs positive thrust gain on d_z
        assert!(sol.k[(0, 2)] > 0.0);
        let pm = sol.p;
        assert!((pm - pm.transpose()).abs().max() <= 1e-10 * pm.abs().max());
        let min_eig = pm.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-10 * pm.norm());
    }

    #[test]
    fn gain_invariant_under_joint_cost_scaling() {
        let p = default_robofly_params();
        let w = LqrWeights::hover_default();
        let k = lqr_gain(&p, &w).unwrap().k;
        for alpha in [0.1, 10.0] {
            let ks = lqr_gain(&p, &w.scaled(alpha)).unwrap().k;
            assert!((ks - k).abs().max() <= 1e-10 * k.abs().max(), "alpha {alpha}");
        }
    }

    #[test]
    fn volts_and_wrench_weights_agree_when_equivalent() {
        let p = default_robofly_params();
        let m = linearize_hover(&p);
        let wv = LqrWeights::hover_default();
        let s = Vector3::from_column_slice(&m.input_scale);
        let r_w =
            SMatrix::<f64, 3, 3>::from_diagonal(&Vector3::new(2.0 / (s.x * s.x), 1.0 / (s.y * s.y), 1.0 / (s.z * s.z)));
        let ww = LqrWeights { r: r_w, input_units: InputUnits::Wrench, ..wv.clone() };
        let a = solve_care(&m, &wv).unwrap().k;
        let b = solve_care(&m, &ww).unwrap().k;
        assert!((a - b).abs().max() <= 1e-9 * a.abs().max());
    }

    #[test]
    fn rejects_singular_r() {
        let p = default_robofly_params();
        let w = LqrWeights::diagonal(&[1.0; 10], &[0.0, 1.0, 1.0]);
        assert!(matches!(lqr_gain(&p, &w), Err(Error::InvalidParameter(_))));
    }
}
