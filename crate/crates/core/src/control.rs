//! Hover-linearized LQR flight controller.
//!
//! Each tick the world-frame position and velocity errors are rotated into the
//! body frame, stacked with the attitude and rate errors against a level
//! attitude, and multiplied by the gain. The resulting wrench deviation is
//! added to the hover feedforward and allocated to actuator commands.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::kinematics::{body_rate_between, EulerAngles321, UnitQuaternion};
use crate::lqr::{GainMatrix, StateVector};
use crate::vehicle::{cmd_to_wrench, wrench_to_cmd, ActuatorCmd, VehicleParams, Wrench};
use crate::{Error, Result};

/// Quaternion norm tolerance accepted from a measurement stream.
pub const QUAT_NORM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub pos_w: Vector3<f64>,
    pub vel_w: Vector3<f64>,
    /// Carried for bookkeeping; yaw is not regulated.
    pub yaw_ref: f64,
}

impl Setpoint {
    pub fn hold(pos_w: Vector3<f64>) -> Self {
        Self { pos_w, vel_w: Vector3::zeros(), yaw_ref: 0.0 }
    }

    pub fn new(pos_w: Vector3<f64>, vel_w: Vector3<f64>) -> Result<Self> {
        let sp = Self { pos_w, vel_w, yaw_ref: 0.0 };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pos_w.iter().chain(self.vel_w.iter()).all(|x| x.is_finite()) && self.yaw_ref.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSource {
    Sim,
    Mocap,
}

/// Controller-side state estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtrlState {
    pub time: f64,
    pub source: StateSource,
    pub pos_w: Vector3<f64>,
    pub vel_w: Vector3<f64>,
    pub euler: EulerAngles321,
    pub rates_b: Vector3<f64>,
}

impl CtrlState {
    pub fn vel_body(&self) -> Vector3<f64> {
        self.euler.to_rotation().to_body(&self.vel_w)
    }

    /// `(d, V_b, phi, theta, p, q)` with `d` the position in body coordinates.
    pub fn sigma(&self) -> StateVector {
        let rot = self.euler.to_rotation();
        let d = rot.to_body(&self.pos_w);
        let vb = rot.to_body(&self.vel_w);
        StateVector::from_column_slice(&[
            d.x,
            d.y,
            d.z,
            vb.x,
            vb.y,
            vb.z,
            self.euler.roll(),
            self.euler.pitch(),
            self.rates_b.x,
            self.rates_b.y,
        ])
    }
}

/// One estimator step from raw measurements.
///
/// World velocity and body rates are first differences against `prev`
/// (position and quaternion of the previous sample); without `prev` they are
/// zero. The quaternion is scalar-first and must be unit within
/// [`QUAT_NORM_TOL`].
pub fn assemble_ctrl_state(
    time: f64,
    meas_pos_w: Vector3<f64>,
    meas_quat: [f64; 4],
    prev: Option<(&Vector3<f64>, &UnitQuaternion)>,
    dt: f64,
) -> Result<CtrlState> {
    let [w, x, y, z] = meas_quat;
    let q = UnitQuaternion::new_checked(w, x, y, z, QUAT_NORM_TOL)?;
    let euler = q.to_euler()?;
    if !meas_pos_w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (vel_w, rates_b) = match prev {
        None => (Vector3::zeros(), Vector3::zeros()),
        Some((p0, q0)) => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidTimestep(dt));
            }
            ((meas_pos_w - p0) / dt, body_rate_between(q0, &q, dt))
        }
    };
    Ok(CtrlState { time, source: StateSource::Mocap, pos_w: meas_pos_w, vel_w, euler, rates_b })
}

/// Smoothing applied to the differenced world velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum VelocityFilter {
    FirstDifference,
    /// Mean of the two most recent first differences.
    #[default]
    MovingAverage2,
}

/// Streaming estimator over a pose measurement sequence.
#[derive(Debug, Clone, Default)]
pub struct StateEstimator {
    pub filter: VelocityFilter,
    last: Option<(f64, Vector3<f64>, UnitQuaternion)>,
    last_diff: Option<Vector3<f64>>,
}

impl StateEstimator {
    pub fn new(filter: VelocityFilter) -> Self {
        Self { filter, last: None, last_diff: None }
    }

    pub fn reset(&mut self) {
        self.last = None;
        self.last_diff = None;
    }

    pub fn update(&mut self, time: f64, pos_w: Vector3<f64>, quat: [f64; 4]) -> Result<CtrlState> {
        let mut s = match &self.last {
            None => assemble_ctrl_state(time, pos_w, quat, None, 0.0)?,
            Some((t0, p0, q0)) => assemble_ctrl_state(time, pos_w, quat, Some((p0, q0)), time - t0)?,
        };
        if self.last.is_some() {
            let diff = s.vel_w;
            if let (VelocityFilter::MovingAverage2, Some(prev)) = (self.filter, self.last_diff) {
                s.vel_w = 0.5 * (diff + prev);
            }
            self.last_diff = Some(diff);
        }
        let [w, x, y, z] = quat;
        self.last = Some((time, pos_w, UnitQuaternion::new(w, x, y, z)?));
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub cmd: ActuatorCmd,
    /// Wrench produced by the (possibly saturated) command.
    pub wrench: Wrench,
    pub saturated: bool,
}

/// Error vector `sigma_des - sigma` with the position and velocity blocks
/// formed in the world frame and rotated into the body frame.
pub fn tracking_error(s: &CtrlState, sp: &Setpoint) -> StateVector {
    let rot = s.euler.to_rotation();
    let ep = rot.to_body(&(sp.pos_w - s.pos_w));
    let ev = rot.to_body(&(sp.vel_w - s.vel_w));
    StateVector::from_column_slice(&[
        ep.x,
        ep.y,
        ep.z,
        ev.x,
        ev.y,
        ev.z,
        -s.euler.roll(),
        -s.euler.pitch(),
        -s.rates_b.x,
        -s.rates_b.y,
    ])
}

pub fn control_step(k: &GainMatrix, s: &CtrlState, sp: &Setpoint, p: &VehicleParams) -> ControlOutput {
    let dw = k * tracking_error(s, sp);
    let demand = Wrench::new(p.hover_thrust() + dw[0], dw[1], dw[2]);
    let alloc = wrench_to_cmd(p, &demand);
    ControlOutput { cmd: alloc.cmd, wrench: cmd_to_wrench(p, &alloc.cmd), saturated: alloc.saturated }
}

/// Point on a horizontal circle traversed counter-clockwise from
/// `center + (radius, 0, 0)`.
pub fn circle_reference(radius: f64, speed: f64, center_w: Vector3<f64>, t: f64) -> Result<Setpoint> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("circle radius must be positive, got {radius}")));
    }
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::InvalidParameter(format!("circle speed must be non-negative, got {speed}")));
    }
    let phase = speed / radius * t;
    let (s, c) = phase.sin_cos();
    Ok(Setpoint {
        pos_w: center_w + Vector3::new(radius * c, radius * s, 0.0),
        vel_w: Vector3::new(-speed * s, speed * c, 0.0),
        yaw_ref: 0.0,
    })
}

/// Desired setpoint as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum SetpointSchedule {
    Constant(Setpoint),
    Circle {
        radius: f64,
        speed: f64,
        center_w: Vector3<f64>,
    },
    /// Rows `(t, setpoint)` with increasing `t`, linearly interpolated and held
    /// constant outside the table.
    Table(Vec<(f64, Setpoint)>),
}

impl SetpointSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant(sp) => sp.validate(),
            Self::Circle { radius, speed, center_w } => circle_reference(*radius, *speed, *center_w, 0.0).map(|_| ()),
            Self::Table(rows) => {
                if rows.is_empty() {
                    return Err(Error::EmptyWindow);
                }
                for (i, w) in rows.windows(2).enumerate() {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::NonMonotoneTime { index: i + 1 });
                    }
                }
                rows.iter().try_for_each(|(_, sp)| sp.validate())
            }
        }
    }

    pub fn at(&self, t: f64) -> Setpoint {
        match self {
            Self::Constant(sp) => *sp,
            Self::Circle { radius, speed, center_w } => {
                circle_reference(*radius, *speed, *center_w, t).unwrap_or(Setpoint::hold(*center_w))
            }
            Self::Table(rows) => interpolate(rows, t),
        }
    }
}

fn interpolate(rows: &[(f64, Setpoint)], t: f64) -> Setpoint {
    let Some(first) = rows.first() else {
        return Setpoint::hold(Vector3::zeros());
    };
    if t <= first.0 {
        return first.1;
    }
    let last = rows[rows.len() - 1];
    if t >= last.0 {
        return last.1;
    }
    let i = rows.partition_point(|(ti, _)| *ti <= t);
    let (t0, a) = rows[i - 1];
    let (t1, b) = rows[i];
    let f = (t - t0) / (t1 - t0);
    Setpoint {
        pos_w: a.pos_w + (b.pos_w - a.pos_w) * f,
        vel_w: a.vel_w + (b.vel_w - a.vel_w) * f,
        yaw_ref: a.yaw_ref + (b.yaw_ref - a.yaw_ref) * f,
    }
}
