//! Rotation representations for the 321 (yaw, pitch, roll) Euler sequence.
//!
//! Conventions used throughout the crate:
//!
//! * World frame is z-up; body frame has `x_b` forward, `y_b` left, `z_b` up
//!   along the stroke-averaged thrust.
//! * [`RotationMatrix`] maps body-frame vectors into the world frame and
//!   factors as `Rz(yaw) * Ry(pitch) * Rx(roll)`.
//! * [`UnitQuaternion`] is scalar-first Hamilton, body to world, and is the
//!   same rotation as the matrix it converts to.

use core::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Pitch magnitudes above this are rejected as the 321 singularity.
pub const GIMBAL_GUARD: f64 = FRAC_PI_2 - 1e-6;

/// `rotmat_to_euler` refuses `|R(3,1)|` at or beyond this.
const ROTMAT_SINGULAR: f64 = 1.0 - 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..=PI).contains(&a) && a != -PI {
        return a;
    }
    let x = a - TAU * ((a + PI) / TAU).floor();
    if x <= -PI {
        x + TAU
    } else {
        x
    }
}

/// Roll, pitch and yaw of the 321 sequence, in radians.
///
/// Construction enforces `|pitch| <= GIMBAL_GUARD` and wraps roll and yaw into
/// `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles321 {
    roll: f64,
    pitch: f64,
    yaw: f64,
}

impl EulerAngles321 {
    pub const LEVEL: Self = Self { roll: 0.0, pitch: 0.0, yaw: 0.0 };

    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        if !(roll.is_finite() && pitch.is_finite() && yaw.is_finite()) {
            return Err(Error::NonFinite);
        }
        if pitch.abs() > GIMBAL_GUARD {
            return Err(Error::GimbalLock { pitch });
        }
        Ok(Self { roll: wrap_angle(roll), pitch, yaw: wrap_angle(yaw) })
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        Self::new(v.x, v.y, v.z)
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        euler_to_rotmat(self)
    }

    /// Angle between body `z_b` and world `Z` (total tilt).
    pub fn tilt(&self) -> f64 {
        (self.pitch.cos() * self.roll.cos()).clamp(-1.0, 1.0).acos()
    }
}

/// Proper rotation matrix, body to world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub const IDENTITY: Self = Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0));

    /// Checks `R^T R = I` and `det R = +1` to 1e-9.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(ortho <= 1e-9 && (det - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidParameter(alloc::format!(
                "not a rotation matrix (orthogonality error {ortho:e}, det {det})"
            )));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn rx(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn ry(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rz(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Body vector expressed in the world frame.
    pub fn to_world(&self, v_body: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v_body
    }

    /// World vector expressed in the body frame.
    pub fn to_body(&self, v_world: &Vector3<f64>) -> Vector3<f64> {
        self.0.tr_mul(v_world)
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    /// World-frame direction of the body z axis.
    pub fn body_z(&self) -> Vector3<f64> {
        self.0.column(2).into_owned()
    }
}

/// `R = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn euler_to_rotmat(e: &EulerAngles321) -> RotationMatrix {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    RotationMatrix(Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

pub fn rotmat_to_euler(r: &RotationMatrix) -> Result<EulerAngles321> {
    let m = &r.0;
    let r31 = m[(2, 0)];
    if r31.abs() >= ROTMAT_SINGULAR {
        return Err(Error::GimbalLock { pitch: if r31 < 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 } });
    }
    let pitch = (-r31).asin();
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    EulerAngles321::new(roll, pitch, yaw)
}

/// `W(roll, pitch)` with `[roll_dot, pitch_dot, yaw_dot] = W * [p, q, r]`.
pub fn euler_rate_matrix(e: &EulerAngles321) -> Matrix3<f64> {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let tp = sp / cp;
    Matrix3::new(1.0, sr * tp, cr * tp, 0.0, cr, -sr, 0.0, sr / cp, cr / cp)
}

/// Scalar-first Hamilton quaternion of unit norm, body to world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes the input; fails on a zero or non-finite quaternion.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if n < 1e-12 {
            return Err(Error::ZeroQuaternion);
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Like [`new`](Self::new) but rejects inputs whose norm is off by more
    /// than `tol`.
    pub fn new_checked(w: f64, x: f64, y: f64, z: f64, tol: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if norm.is_finite() && norm >= 1e-12 && (norm - 1.0).abs() > tol {
            return Err(Error::NonUnitQuaternion { norm, tol });
        }
        Self::new(w, x, y, z)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Representative with `w >= 0`.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product, renormalized.
    pub fn mul(&self, o: &Self) -> Self {
        let w = self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z;
        let x = self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y;
        let y = self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x;
        let z = self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // second-order accurate near zero
            let h = 0.5 * v;
            let w = 1.0 - 0.5 * h.norm_squared();
            let n = (w * w + h.norm_squared()).sqrt();
            return Self { w: w / n, x: h.x / n, y: h.y / n, z: h.z / n };
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / angle;
        Self { w: c, x: v.x * k, y: v.y * k, z: v.z * k }
    }

    /// Logarithm map: the minimal rotation vector of this rotation.
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = self.canonical();
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn from_euler(e: &EulerAngles321) -> Self {
        let (sr, cr) = (0.5 * e.roll).sin_cos();
        let (sp, cp) = (0.5 * e.pitch).sin_cos();
        let (sy, cy) = (0.5 * e.yaw).sin_cos();
        Self {
            w: cy * cp * cr + sy * sp * sr,
            x: cy * cp * sr - sy * sp * cr,
            y: cy * sp * cr + sy * cp * sr,
            z: sy * cp * cr - cy * sp * sr,
        }
        .renormalized()
    }

    /// Shepperd's method; result has `w >= 0`.
    pub fn from_rotation(r: &RotationMatrix) -> Self {
        let m = &r.0;
        let tr = m.trace();
        let (w, x, y, z);
        if tr >= m[(0, 0)] && tr >= m[(1, 1)] && tr >= m[(2, 2)] {
            let s = 2.0 * (1.0 + tr).sqrt();
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] >= m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        Self { w, x, y, z }.renormalized().canonical()
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        quat_to_rotmat(self)
    }

    pub fn to_euler(&self) -> Result<EulerAngles321> {
        rotmat_to_euler(&self.to_rotation())
    }

    fn renormalized(self) -> Self {
        let n = self.dot(&self).sqrt();
        Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }
}

impl core::ops::Neg for UnitQuaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

pub fn quat_to_rotmat(q: &UnitQuaternion) -> RotationMatrix {
    let UnitQuaternion { w, x, y, z } = *q;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    RotationMatrix(Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    ))
}

/// Body angular velocity that carries `q0` to `q1` in `dt` at a constant rate.
pub fn body_rate_between(q0: &UnitQuaternion, q1: &UnitQuaternion, dt: f64) -> Vector3<f64> {
    q0.conjugate().mul(q1).to_rotation_vector() / dt
}
