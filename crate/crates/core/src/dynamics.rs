//! Stroke-averaged rigid-body equations of motion in body coordinates.
//!
//! Translational:
//!
//! ```text
//! V_b' = g_b + F_a - w_b x V_b + (Gamma / (m + m_M)) z_b + R^T F_ext / (m + m_M)
//! ```
//!
//! with `g_b = (g sin(theta), -g cos(theta) sin(phi), -g cos(theta) cos(phi))`.
//!
//! Rotational (diagonal inertia, no yaw input):
//!
//! ```text
//! p' = L + tau_r / J_xx - (J_zz - J_yy) / J_xx * q r
//! q' = M + tau_p / J_yy - (J_xx - J_zz) / J_yy * r p
//! r' = N            - (J_yy - J_xx) / J_zz * p q
//! ```

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::kinematics::{euler_rate_matrix, EulerAngles321};
use crate::vehicle::{VehicleParams, Wrench};
use crate::{Error, Result};

/// Full 12-dimensional simulation state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    /// World position `(X, Y, Z)`, m.
    pub pos: Vector3<f64>,
    /// Body velocity `(u, v, w)`, m/s.
    pub vel_body: Vector3<f64>,
    pub euler: EulerAngles321,
    /// Body rates `(p, q, r)`, rad/s.
    pub rates: Vector3<f64>,
}

impl Default for SimState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl SimState {
    pub fn at_rest(pos: Vector3<f64>) -> Self {
        Self { pos, vel_body: Vector3::zeros(), euler: EulerAngles321::LEVEL, rates: Vector3::zeros() }
    }

    pub fn vel_world(&self) -> Vector3<f64> {
        self.euler.to_rotation().to_world(&self.vel_body)
    }

    pub fn to_array(&self) -> [f64; 12] {
        let e = self.euler.as_vector();
        [
            self.pos.x,
            self.pos.y,
            self.pos.z,
            self.vel_body.x,
            self.vel_body.y,
            self.vel_body.z,
            e.x,
            e.y,
            e.z,
            self.rates.x,
            self.rates.y,
            self.rates.z,
        ]
    }

    pub fn from_array(a: &[f64; 12]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            pos: Vector3::new(a[0], a[1], a[2]),
            vel_body: Vector3::new(a[3], a[4], a[5]),
            euler: EulerAngles321::new(a[6], a[7], a[8])?,
            rates: Vector3::new(a[9], a[10], a[11]),
        })
    }
}

/// Time derivative of a [`SimState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub pos_dot: Vector3<f64>,
    /// `(u', v', w')`
    pub vel_body_dot: Vector3<f64>,
    pub euler_dot: Vector3<f64>,
    /// `(p', q', r')`
    pub rates_dot: Vector3<f64>,
}

impl StateDerivative {
    pub fn to_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (block, v) in [self.pos_dot, self.vel_body_dot, self.euler_dot, self.rates_dot].iter().enumerate() {
            out[3 * block..3 * block + 3].copy_from_slice(v.as_slice());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// The six body accelerations `(u', v', w', p', q', r')`.
    pub fn body_accelerations(&self) -> [f64; 6] {
        [
            self.vel_body_dot.x,
            self.vel_body_dot.y,
            self.vel_body_dot.z,
            self.rates_dot.x,
            self.rates_dot.y,
            self.rates_dot.z,
        ]
    }
}

/// Unmodeled aerodynamic terms; zero unless injected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnmodeledTerms {
    /// `(f_a1, f_a2, f_a3)`, specific force in m/s^2.
    pub force: Vector3<f64>,
    /// `(L, M, N)`, angular acceleration in rad/s^2.
    pub moment: Vector3<f64>,
}

impl Default for UnmodeledTerms {
    fn default() -> Self {
        Self::ZERO
    }
}

impl UnmodeledTerms {
    pub const ZERO: Self = Self { force: Vector3::new(0.0, 0.0, 0.0), moment: Vector3::new(0.0, 0.0, 0.0) };
}

/// Form of the velocity-coupling term in the body translational equations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CoriolisForm {
    /// `-(w_b x V_b)` on all three axes.
    #[default]
    CrossProduct,
    /// As [`CrossProduct`](Self::CrossProduct) except the lateral axis uses
    /// `-(r v - p w)`, reproducing the equation as typeset in the source
    /// model description. For comparison only.
    SwappedLateral,
}

pub fn state_derivative(
    p: &VehicleParams,
    s: &SimState,
    w: &Wrench,
    un: &UnmodeledTerms,
    ext_force_w: &Vector3<f64>,
) -> Result<StateDerivative> {
    state_derivative_with(p, s, w, un, ext_force_w, CoriolisForm::CrossProduct)
}

pub fn state_derivative_with(
    p: &VehicleParams,
    s: &SimState,
    w: &Wrench,
    un: &UnmodeledTerms,
    ext_force_w: &Vector3<f64>,
    coriolis: CoriolisForm,
) -> Result<StateDerivative> {
    let g = p.gravity;
    let mass = p.total_mass();
    let [jxx, jyy, jzz] = p.inertia;
    let (phi, theta) = (s.euler.roll(), s.euler.pitch());
    let rot = s.euler.to_rotation();
    let (u, v, wv) = (s.vel_body.x, s.vel_body.y, s.vel_body.z);
    let (pr, qr, rr) = (s.rates.x, s.rates.y, s.rates.z);

    let lateral_coupling = match coriolis {
        CoriolisForm::CrossProduct => rr * u - pr * wv,
        CoriolisForm::SwappedLateral => rr * v - pr * wv,
    };
    let gravity_b = Vector3::new(g * theta.sin(), -g * theta.cos() * phi.sin(), -g * theta.cos() * phi.cos());
    let coupling = Vector3::new(qr * wv - rr * v, lateral_coupling, pr * v - qr * u);
    let thrust = Vector3::new(0.0, 0.0, w.thrust / mass);
    let ext_b = rot.to_body(ext_force_w) / mass;
    let vel_body_dot = gravity_b + un.force - coupling + thrust + ext_b;

    let rates_dot = Vector3::new(
        un.moment.x + w.roll_torque / jxx - (jzz - jyy) / jxx * qr * rr,
        un.moment.y + w.pitch_torque / jyy - (jxx - jzz) / jyy * rr * pr,
        un.moment.z - (jyy - jxx) / jzz * pr * qr,
    );

    Ok(StateDerivative {
        pos_dot: rot.to_world(&s.vel_body),
        vel_body_dot,
        euler_dot: euler_rate_matrix(&s.euler) * s.rates,
        rates_dot,
    })
}

/// Hover fixed point: level, at rest at the origin, thrust equal to weight.
pub fn hover_equilibrium(p: &VehicleParams) -> (SimState, Wrench) {
    (SimState::default(), Wrench::new(p.hover_thrust(), 0.0, 0.0))
}

/// Largest physics step accepted by [`rk4_step`].
pub const MAX_DT: f64 = 5e-3;

/// Classic four-stage Runge-Kutta step with the wrench, unmodeled terms and
/// external force held constant over `dt`.
pub fn rk4_step(
    p: &VehicleParams,
    s: &SimState,
    cmd_hold: &Wrench,
    un: &UnmodeledTerms,
    ext_force_w: &Vector3<f64>,
    dt: f64,
) -> Result<SimState> {
    rk4_step_with(p, s, cmd_hold, un, ext_force_w, dt, CoriolisForm::CrossProduct)
}

pub fn rk4_step_with(
    p: &VehicleParams,
    s: &SimState,
    cmd_hold: &Wrench,
    un: &UnmodeledTerms,
    ext_force_w: &Vector3<f64>,
    dt: f64,
    coriolis: CoriolisForm,
) -> Result<SimState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidTimestep(dt));
    }
    let f = |x: &[f64; 12]| -> Result<[f64; 12]> {
        let st = SimState::from_array(x)?;
        Ok(state_derivative_with(p, &st, cmd_hold, un, ext_force_w, coriolis)?.to_array())
    };
    let x0 = s.to_array();
    let stage = |k: &[f64; 12], h: f64| -> [f64; 12] { core::array::from_fn(|i| x0[i] + h * k[i]) };
    let k1 = f(&x0)?;
    let k2 = f(&stage(&k1, 0.5 * dt))?;
    let k3 = f(&stage(&k2, 0.5 * dt))?;
    let k4 = f(&stage(&k3, dt))?;
    let x1: [f64; 12] = core::array::from_fn(|i| x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    SimState::from_array(&x1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::default_robofly_params;
    use approx::assert_relative_eq;

    fn zero() -> Vector3<f64> {
        Vector3::zeros()
    }

    #[test]
    fn hover_is_a_fixed_point() {
        let p = default_robofly_params();
        let (s, w) = hover_equilibrium(&p);
        assert_relative_eq!(w.thrust, 186e-6 * 9.81, max_relative = 1e-15);
        assert_eq!(s.euler, EulerAngles321::LEVEL);
        let d = state_derivative(&p, &s, &w, &UnmodeledTerms::ZERO, &zero()).unwrap();
        assert!(d.norm() <= 1e-12, "{}", d.norm());
    }

    #[test]
    fn pitched_thirty_degrees_accelerates_forward_at_half_g() {
        let p = default_robofly_params();
        let s = SimState { euler: EulerAngles321::new(0.0, 30f64.to_radians(), 0.0).unwrap(), ..SimState::default() };
        let w = Wrench::new(p.hover_thrust(), 0.0, 0.0);
        let d = state_derivative(&p, &s, &w, &UnmodeledTerms::ZERO, &zero()).unwrap();
        assert_relative_eq!(d.vel_body_dot.x, 4.905, epsilon = 1e-12);
    }

    #[test]
    fn roll_torque_produces_roll_acceleration() {
        let p = default_robofly_params();
        let (s, _) = hover_equilibrium(&p);
        let w = Wrench::new(p.hover_thrust(), 4.8e-6, 0.0);
        let d = state_derivative(&p, &s, &w, &UnmodeledTerms::ZERO, &zero()).unwrap();
        assert_relative_eq!(d.rates_dot.x, 4.8e-6 / 3.12e-9, max_relative = 1e-14);
        assert_relative_eq!(d.rates_dot.x, 1538.46, epsilon = 0.01);
    }

    #[test]
    fn coupling_is_the_body_cross_product() {
        let p = default_robofly_params();
        let s = SimState {
            vel_body: Vector3::new(0.3, -0.2, 0.1),
            rates: Vector3::new(1.0, 2.0, -3.0),
            ..SimState::default()
        };
        let w = Wrench::new(p.hover_thrust(), 0.0, 0.0);
        let d = state_derivative(&p, &s, &w, &UnmodeledTerms::ZERO, &zero()).unwrap();
        let expected = -s.rates.cross(&s.vel_body);
        assert_relative_eq!(d.vel_body_dot, expected, epsilon = 1e-12);
        let lit =
            state_derivative_with(&p, &s, &w, &UnmodeledTerms::ZERO, &zero(), CoriolisForm::SwappedLateral).unwrap();
        assert_relative_eq!(lit.vel_body_dot.x, expected.x, epsilon = 1e-12);
        assert_relative_eq!(lit.vel_body_dot.y, -(-3.0 * -0.2 - 1.0 * 0.1), epsilon = 1e-12);
    }

    #[test]
    fn external_force_enters_through_rotation() {
        let p = default_robofly_params();
        let s = SimState {
            euler: EulerAngles321::new(0.0, 0.0, core::f64::consts::FRAC_PI_2).unwrap(),
            ..SimState::default()
        };
        let w = Wrench::new(p.hover_thrust(), 0.0, 0.0);
        let f = Vector3::new(p.total_mass(), 0.0, 0.0);
        let d = state_derivative(&p, &s, &w, &UnmodeledTerms::ZERO, &f).unwrap();
        // world +X is body -y after a +90 deg yaw
        assert_relative_eq!(d.vel_body_dot, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rk4_keeps_equilibrium() {
        let p = default_robofly_params();
        let (s, w) = hover_equilibrium(&p);
        let mut x = s;
        for _ in 0..1000 {
            x = rk4_step(&p, &x, &w, &UnmodeledTerms::ZERO, &zero(), 1e-4).unwrap();
        }
        let dev = x.to_array().iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-12, "{dev}");
    }

    #[test]
    fn rk4_free_fall() {
        let p = default_robofly_params();
        let mut x = SimState::default();
        let w = Wrench::default();
        for _ in 0..1000 {
            x = rk4_step(&p, &x, &w, &UnmodeledTerms::ZERO, &zero(), 1e-4).unwrap();
        }
        assert_relative_eq!(x.vel_body.z, -0.981, epsilon = 1e-12);
        assert_relative_eq!(x.pos.z, -0.5 * 9.81 * 0.01, epsilon = 1e-12);
    }

    #[test]
    fn rk4_constant_roll_acceleration() {
        let p = default_robofly_params();
        let (mut x, hover) = hover_equilibrium(&p);
        let tau = 1e-8;
        let alpha = tau / p.inertia[0];
        let w = Wrench { roll_torque: tau, ..hover };
        for _ in 0..100 {
            x = rk4_step(&p, &x, &w, &UnmodeledTerms::ZERO, &zero(), 1e-4).unwrap();
        }
        let t = 0.01;
        assert!((x.rates.x - alpha * t).abs() < 1e-6);
        assert!((x.euler.roll() - 0.5 * alpha * t * t).abs() < 1e-6);
    }

    #[test]
    fn rk4_rejects_bad_timestep() {
        let p = default_robofly_params();
        let (s, w) = hover_equilibrium(&p);
        for dt in [0.0, -1e-4, 6e-3, f64::NAN] {
            assert!(matches!(rk4_step(&p, &s, &w, &UnmodeledTerms::ZERO, &zero(), dt), Err(Error::InvalidTimestep(_))));
        }
    }

    fn energy(p: &VehicleParams, s: &SimState) -> f64 {
        let [jxx, jyy, jzz] = p.inertia;
        let r = s.rates;
        0.5 * p.total_mass() * s.vel_body.norm_squared()
            + p.total_mass() * p.gravity * s.pos.z
            + 0.5 * (jxx * r.x * r.x + jyy * r.y * r.y + jzz * r.z * r.z)
    }

    #[test]
    fn ballistic_energy_is_conserved() {
        let p = default_robofly_params();
        let mut x = SimState {
            pos: Vector3::new(0.0, 0.0, 1.0),
            vel_body: Vector3::new(0.4, -0.2, 0.3),
            euler: EulerAngles321::new(0.2, -0.1, 0.4).unwrap(),
            rates: Vector3::new(0.5, -0.3, 0.2),
        };
        let e0 = energy(&p, &x);
        for _ in 0..1000 {
            x = rk4_step(&p, &x, &Wrench::default(), &UnmodeledTerms::ZERO, &zero(), 1e-4).unwrap();
        }
        let drift = (energy(&p, &x) - e0).abs() / e0.abs();
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = default_robofly_params();
        let s0 = SimState {
            vel_body: Vector3::new(0.1, 0.05, -0.02),
            euler: EulerAngles321::new(0.1, -0.05, 0.2).unwrap(),
            rates: Vector3::new(3.0, -2.0, 1.0),
            ..SimState::default()
        };
        let w = Wrench::new(p.hover_thrust() * 1.1, 5e-9, -3e-9);
        let run = |dt: f64| {
            let n = (0.02 / dt).round() as usize;
            let mut x = s0;
            for _ in 0..n {
                x = rk4_step(&p, &x, &w, &UnmodeledTerms::ZERO, &zero(), dt).unwrap();
            }
            x.to_array()
        };
        let dt = 1e-3;
        let reference = run(dt / 16.0);
        let err = |a: [f64; 12]| a.iter().zip(reference.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let ratio = err(run(dt)) / err(run(dt / 2.0));
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn yaw_rate_is_constant_without_roll_and_pitch_rates() {
        let p = default_robofly_params();
        let (mut x, w) = hover_equilibrium(&p);
        x.rates = Vector3::new(0.0, 0.0, 1.5);
        for _ in 0..500 {
            x = rk4_step(&p, &x, &w, &UnmodeledTerms::ZERO, &zero(), 1e-4).unwrap();
        }
        assert_eq!(x.rates.z, 1.5);
        assert_eq!(x.rates.x, 0.0);
    }
}
