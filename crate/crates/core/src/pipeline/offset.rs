//! Thrust-direction (body-offset) estimate from a short trimmed takeoff.
//!
//! The stroke-averaged thrust acts along body z. During a trimmed open-loop
//! takeoff the specific force `a_w + g z_w` is therefore the thrust direction
//! seen in the world; expressed in the recorded body frame it exposes any
//! misalignment between the marker-defined body axes and the true thrust axis.

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use super::filter::FilterConfig;
use super::reconstruct::reconstruct;
use super::MocapTrajectory;
use crate::kinematics::RotationMatrix;
use crate::{Error, Result};

/// Misalignment beyond which the trim flight is considered unusable, rad.
pub const MAX_OFFSET_TILT: f64 = 30.0 * core::f64::consts::PI / 180.0;
/// Minimum mean world acceleration (in g) for a usable takeoff window.
pub const MIN_NET_ACCEL_G: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyOffset {
    /// Maps the recorded body z-axis onto the estimated thrust direction,
    /// both in body coordinates.
    pub rotation: RotationMatrix,
    /// Angle between the recorded body z-axis and the thrust direction, rad.
    pub tilt: f64,
    /// Estimated thrust direction in recorded body coordinates.
    pub thrust_dir_b: Vector3<f64>,
}

/// Smallest rotation taking unit vector `a` onto unit vector `b`.
fn minimal_rotation(a: &Vector3<f64>, b: &Vector3<f64>) -> RotationMatrix {
    let v = a.cross(b);
    let c = a.dot(b);
    let s = v.norm();
    if s < 1e-15 {
        return RotationMatrix::IDENTITY;
    }
    let k = v / s;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    let m = Matrix3::identity() + kx * s + kx * kx * (1.0 - c);
    RotationMatrix::from_matrix_unchecked(m)
}

/// Estimates the body offset over the samples in `[t0, t1]`.
///
/// The body-frame specific force `R^T (a_w + g z_w)` is averaged over the
/// window. A window whose mean world acceleration is below
/// [`MIN_NET_ACCEL_G`] (for instance steady hover) cannot separate thrust
/// direction from attitude and is rejected.
pub fn estimate_body_offset(tr: &MocapTrajectory, window: (f64, f64), gravity: f64) -> Result<BodyOffset> {
    let (t0, t1) = window;
    let (s0, s1) = tr.span();
    if !(t1 > t0) || t0 < s0 - 1e-9 || t1 > s1 + 1e-9 {
        return Err(Error::WindowOutOfRange { t0, t1 });
    }
    let rs = reconstruct(tr, &FilterConfig::default())?;
    let win = rs.restrict(t0, t1)?;
    let n = win.len() as f64;
    let mut acc_w = Vector3::zeros();
    let mut force_b = Vector3::zeros();
    for (s, a) in win.states.iter().zip(&win.accel_w) {
        acc_w += a;
        force_b += s.euler.to_rotation().to_body(&(a + Vector3::new(0.0, 0.0, gravity)));
    }
    acc_w /= n;
    force_b /= n;
    let accel_g = acc_w.norm() / gravity;
    if accel_g < MIN_NET_ACCEL_G {
        return Err(Error::WeakSpecificForce { accel_g, min_g: MIN_NET_ACCEL_G });
    }
    let dir = force_b / force_b.norm();
    let tilt = dir.z.clamp(-1.0, 1.0).acos();
    if tilt >= MAX_OFFSET_TILT {
        return Err(Error::ExcessiveTilt { tilt_deg: tilt.to_degrees() });
    }
    Ok(BodyOffset { rotation: minimal_rotation(&Vector3::z(), &dir), tilt, thrust_dir_b: dir })
}
