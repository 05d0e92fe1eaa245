//! Measured robot parameters and the linear actuator maps.
//!
//! Inputs are the three drive-signal parameters of the piezo actuators: flap
//! amplitude `A`, the left/right amplitude differential `dA`, and the offset
//! voltage `Vo`. Each maps linearly onto one component of the wrench.

use alloc::format;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Name of the built-in parameter profile.
pub const ROBOFLY_PROFILE: &str = "robofly-150mg";

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// Robot mass, kg.
    pub mass: f64,
    /// Motion-capture marker mass, kg. Adds to translational inertia only.
    pub marker_mass: f64,
    /// Principal moments of inertia `(J_xx, J_yy, J_zz)`, kg m^2.
    pub inertia: [f64; 3],
    /// N per V of flap amplitude.
    pub thrust_slope: f64,
    /// N at zero amplitude (negative for the measured fit).
    pub thrust_intercept: f64,
    /// N m per V of amplitude differential.
    pub roll_slope: f64,
    /// N m per V of offset voltage.
    pub pitch_slope: f64,
    pub gravity: f64,
    /// `[min, max]` flap amplitude, V.
    pub amplitude_limits: [f64; 2],
    /// Bound on `|dA|`, V.
    pub amplitude_diff_limit: f64,
    /// Bound on `|Vo|`, V.
    pub offset_limit: f64,
    /// Bias voltage on the actuator top layer, V.
    pub bias_voltage: f64,
    /// Flapping frequency, Hz.
    pub flap_freq: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        default_robofly_params()
    }
}

/// The 150 mg robot: mass, marker mass, inertia and the three linear fits as
/// measured, plus saturation limits chosen for this crate.
pub fn default_robofly_params() -> VehicleParams {
    VehicleParams {
        mass: 150e-6,
        marker_mass: 36e-6,
        inertia: [3.12e-9, 2.97e-9, 0.55e-9],
        thrust_slope: 3.27e-5,
        thrust_intercept: -0.0024,
        roll_slope: 0.48e-6,
        pitch_slope: 0.11e-6,
        gravity: 9.81,
        amplitude_limits: [0.0, 250.0],
        amplitude_diff_limit: 40.0,
        offset_limit: 60.0,
        bias_voltage: 250.0,
        flap_freq: 180.0,
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("marker_mass", self.marker_mass),
            ("J_xx", self.inertia[0]),
            ("J_yy", self.inertia[1]),
            ("J_zz", self.inertia[2]),
            ("thrust_slope", self.thrust_slope),
            ("roll_slope", self.roll_slope),
            ("pitch_slope", self.pitch_slope),
            ("gravity", self.gravity),
            ("flap_freq", self.flap_freq),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let [lo, hi] = self.amplitude_limits;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("amplitude limits [{lo}, {hi}] are empty")));
        }
        for (name, v) in [("dA_limit", self.amplitude_diff_limit), ("Vo_limit", self.offset_limit)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.thrust_intercept.is_finite() && self.bias_voltage.is_finite()) {
            return Err(Error::InvalidParameter("non-finite thrust intercept or bias".into()));
        }
        Ok(())
    }

    /// Robot plus markers.
    pub fn total_mass(&self) -> f64 {
        self.mass + self.marker_mass
    }

    pub fn hover_thrust(&self) -> f64 {
        self.total_mass() * self.gravity
    }

    /// Amplitude at which the thrust fit crosses zero.
    pub fn zero_thrust_amplitude(&self) -> f64 {
        -self.thrust_intercept / self.thrust_slope
    }

    /// Largest thrust the amplitude limit allows.
    pub fn max_thrust(&self) -> f64 {
        (self.thrust_slope * self.amplitude_limits[1] + self.thrust_intercept).max(0.0)
    }

    /// Wrench change per volt on each input channel: `(dGamma/dA, dtau_r/ddA, dtau_p/dVo)`.
    pub fn input_scale(&self) -> [f64; 3] {
        [self.thrust_slope, self.roll_slope, self.pitch_slope]
    }

    /// Clamps each channel into its limits.
    pub fn saturate(&self, c: &ActuatorCmd) -> (ActuatorCmd, bool) {
        let [lo, hi] = self.amplitude_limits;
        let out = ActuatorCmd {
            amplitude: c.amplitude.clamp(lo, hi),
            amplitude_diff: c.amplitude_diff.clamp(-self.amplitude_diff_limit, self.amplitude_diff_limit),
            offset: c.offset.clamp(-self.offset_limit, self.offset_limit),
        };
        let clipped = out != *c;
        (out, clipped)
    }
}

/// Drive-signal parameters in volts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActuatorCmd {
    /// `A`
    pub amplitude: f64,
    /// `dA`
    pub amplitude_diff: f64,
    /// `Vo`
    pub offset: f64,
}

impl ActuatorCmd {
    pub const fn new(amplitude: f64, amplitude_diff: f64, offset: f64) -> Self {
        Self { amplitude, amplitude_diff, offset }
    }
}

/// Stroke-averaged thrust along `+z_b` and the roll/pitch torques.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Wrench {
    /// N
    pub thrust: f64,
    /// N m about `x_b`
    pub roll_torque: f64,
    /// N m about `y_b`
    pub pitch_torque: f64,
}

impl Wrench {
    pub const fn new(thrust: f64, roll_torque: f64, pitch_torque: f64) -> Self {
        Self { thrust, roll_torque, pitch_torque }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.thrust, self.roll_torque, self.pitch_torque]
    }
}

/// A command together with whether any channel hit a limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub cmd: ActuatorCmd,
    pub saturated: bool,
}

/// Applies the linear fits. Thrust below the fit's zero crossing is clamped
/// to zero rather than extrapolated negative.
pub fn cmd_to_wrench(p: &VehicleParams, c: &ActuatorCmd) -> Wrench {
    Wrench {
        thrust: (p.thrust_slope * c.amplitude + p.thrust_intercept).max(0.0),
        roll_torque: p.roll_slope * c.amplitude_diff,
        pitch_torque: p.pitch_slope * c.offset,
    }
}

/// Inverse of [`cmd_to_wrench`] followed by saturation.
///
/// A negative thrust request is clamped to zero thrust (the fit's zero
/// crossing) and flagged.
pub fn wrench_to_cmd(p: &VehicleParams, w: &Wrench) -> Allocation {
    let thrust_clamped = w.thrust < 0.0;
    let thrust = w.thrust.max(0.0);
    let raw = ActuatorCmd {
        amplitude: (thrust - p.thrust_intercept) / p.thrust_slope,
        amplitude_diff: w.roll_torque / p.roll_slope,
        offset: w.pitch_torque / p.pitch_slope,
    };
    let (cmd, clipped) = p.saturate(&raw);
    Allocation { cmd, saturated: clipped || thrust_clamped }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Instantaneous actuator voltage
/// `(A +/- dA)/2 * sin(2 pi f t) + V_bias/2 + Vo/2`.
///
/// The amplitude differential is applied with `+` on the left wing and `-` on
/// the right (positive roll torque lifts the left side); the offset is common
/// to both wings.
pub fn drive_signal(p: &VehicleParams, c: &ActuatorCmd, side: Side, t: f64) -> f64 {
    let amplitude = match side {
        Side::Left => c.amplitude + c.amplitude_diff,
        Side::Right => c.amplitude - c.amplitude_diff,
    };
    0.5 * amplitude * (TAU * p.flap_freq * t).sin() + 0.5 * p.bias_voltage + 0.5 * c.offset
}
