//! Body states and accelerations from a recorded pose stream.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;

use super::filter::{filtfilt, Butterworth2, FilterConfig};
use super::{CommandTrack, MocapTrajectory};
use crate::dynamics::SimState;
use crate::kinematics::UnitQuaternion;
use crate::vehicle::ActuatorCmd;
use crate::{Error, Result};

/// Shortest trajectory accepted by [`reconstruct`].
pub const MIN_SAMPLES: usize = 9;

/// Samples dropped at each end by the nested central differences.
const MARGIN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedStates {
    pub source: String,
    pub t: Vec<f64>,
    pub states: Vec<SimState>,
    /// `(u', v', w', p', q', r')`: time derivatives of the body velocity and
    /// body rate components.
    pub accel: Vec<[f64; 6]>,
    /// World-frame acceleration of the recorded position.
    pub accel_w: Vec<Vector3<f64>>,
    pub cmds: Option<Vec<ActuatorCmd>>,
}

impl ReconstructedStates {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Looks up the held command at every sample time.
    pub fn attach_commands(&mut self, track: &CommandTrack) -> Result<()> {
        let cmds: Option<Vec<_>> = self.t.iter().map(|&t| track.at(t)).collect();
        self.cmds = Some(cmds.ok_or(Error::MissingCommands)?);
        Ok(())
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn restrict(&self, t0: f64, t1: f64) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.t[i] >= t0 && self.t[i] <= t1).collect();
        if idx.is_empty() {
            return Err(Error::WindowOutOfRange { t0, t1 });
        }
        Ok(Self {
            source: self.source.clone(),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            states: idx.iter().map(|&i| self.states[i]).collect(),
            accel: idx.iter().map(|&i| self.accel[i]).collect(),
            accel_w: idx.iter().map(|&i| self.accel_w[i]).collect(),
            cmds: self.cmds.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
        })
    }

    /// Concatenation of several reconstructions, in order.
    pub fn concat(parts: &[ReconstructedStates]) -> Self {
        let mut out = Self {
            source: String::from("stacked"),
            t: Vec::new(),
            states: Vec::new(),
            accel: Vec::new(),
            accel_w: Vec::new(),
            cmds: if parts.iter().all(|p| p.cmds.is_some()) { Some(Vec::new()) } else { None },
        };
        for p in parts {
            out.t.extend_from_slice(&p.t);
            out.states.extend_from_slice(&p.states);
            out.accel.extend_from_slice(&p.accel);
            out.accel_w.extend_from_slice(&p.accel_w);
            if let (Some(dst), Some(src)) = (out.cmds.as_mut(), p.cmds.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        out
    }
}

/// Three-point derivative weights on a possibly non-uniform grid.
fn d1(t: &[f64], x: &[f64], k: usize) -> f64 {
    let (hm, hp) = (t[k] - t[k - 1], t[k + 1] - t[k]);
    (hm * hm * x[k + 1] - hp * hp * x[k - 1] + (hp * hp - hm * hm) * x[k]) / (hm * hp * (hm + hp))
}

fn d2(t: &[f64], x: &[f64], k: usize) -> f64 {
    let (hm, hp) = (t[k] - t[k - 1], t[k + 1] - t[k]);
    2.0 * (hm * x[k + 1] - (hm + hp) * x[k] + hp * x[k - 1]) / (hm * hp * (hm + hp))
}

/// Reconstructs body velocities, rates and their derivatives.
///
/// Positions and (hemisphere-aligned) quaternion components are low-passed
/// forward-backward, then differentiated with central differences. Body rates
/// come from the relative rotation between the neighbouring samples, and the
/// body-velocity derivative includes the frame term `-w_b x V_b`.
pub fn reconstruct(tr: &MocapTrajectory, cfg: &FilterConfig) -> Result<ReconstructedStates> {
    let n = tr.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooShort { len: n, min: MIN_SAMPLES });
    }
    if let Some(&i) = tr.gaps.first() {
        let s = tr.samples();
        return Err(Error::GapTooLarge { index: i, gap: s[i].t - s[i - 1].t });
    }
    let s = tr.samples();
    let t: Vec<f64> = s.iter().map(|x| x.t).collect();

    let mut quats: Vec<[f64; 4]> = Vec::with_capacity(n);
    for smp in s {
        let mut q = smp.quat.components();
        if let Some(prev) = quats.last() {
            if q.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                q = q.map(|c| -c);
            }
        }
        quats.push(q);
    }
    let mut pos: [Vec<f64>; 3] = core::array::from_fn(|i| s.iter().map(|x| x.pos[i]).collect());
    if cfg.enabled {
        let f = Butterworth2::lowpass(cfg.cutoff_hz, tr.sample_rate)?;
        for axis in &mut pos {
            *axis = filtfilt(&f, axis);
        }
        let comps: [Vec<f64>; 4] =
            core::array::from_fn(|c| filtfilt(&f, &quats.iter().map(|q| q[c]).collect::<Vec<_>>()));
        for (k, q) in quats.iter_mut().enumerate() {
            *q = [comps[0][k], comps[1][k], comps[2][k], comps[3][k]];
        }
    }
    let quats: Vec<UnitQuaternion> =
        quats.iter().map(|q| UnitQuaternion::new(q[0], q[1], q[2], q[3])).collect::<Result<_>>()?;

    // body rates on 1..n-1
    let mut omega = alloc::vec![Vector3::zeros(); n];
    for k in 1..n - 1 {
        omega[k] = quats[k - 1].conjugate().mul(&quats[k + 1]).to_rotation_vector() / (t[k + 1] - t[k - 1]);
    }
    let om: [Vec<f64>; 3] = core::array::from_fn(|i| omega.iter().map(|w| w[i]).collect());

    let mut out = ReconstructedStates {
        source: tr.source.clone(),
        t: Vec::with_capacity(n - 2 * MARGIN),
        states: Vec::with_capacity(n - 2 * MARGIN),
        accel: Vec::with_capacity(n - 2 * MARGIN),
        accel_w: Vec::with_capacity(n - 2 * MARGIN),
        cmds: None,
    };
    for k in MARGIN..n - MARGIN {
        let vel_w = Vector3::new(d1(&t, &pos[0], k), d1(&t, &pos[1], k), d1(&t, &pos[2], k));
        let acc_w = Vector3::new(d2(&t, &pos[0], k), d2(&t, &pos[1], k), d2(&t, &pos[2], k));
        let euler = quats[k].to_euler()?;
        let rot = euler.to_rotation();
        let vb = rot.to_body(&vel_w);
        let w = omega[k];
        let vb_dot = rot.to_body(&acc_w) - w.cross(&vb);
        let w_dot = Vector3::new(d1(&t, &om[0], k), d1(&t, &om[1], k), d1(&t, &om[2], k));
        out.t.push(t[k]);
        out.states.push(SimState { pos: Vector3::new(pos[0][k], pos[1][k], pos[2][k]), vel_body: vb, euler, rates: w });
        out.accel.push([vb_dot.x, vb_dot.y, vb_dot.z, w_dot.x, w_dot.y, w_dot.z]);
        out.accel_w.push(acc_w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::MocapSample;
    use approx::assert_relative_eq;

    fn traj(n: usize, f: impl Fn(f64) -> (Vector3<f64>, UnitQuaternion)) -> MocapTrajectory {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / 240.0;
                let (pos, quat) = f(t);
                MocapSample { t, pos, quat }
            })
            .collect();
        MocapTrajectory::new(samples, "synthetic").unwrap()
    }

    #[test]
    fn exact_hover_has_zero_motion() {
        let tr = traj(100, |_| (Vector3::new(0.1, 0.2, 0.3), UnitQuaternion::IDENTITY));
        let rs = reconstruct(&tr, &FilterConfig::default()).unwrap();
        assert_eq!(rs.len(), 96);
        for (s, a) in rs.states.iter().zip(&rs.accel) {
            assert!(s.vel_body.norm() < 1e-9 && s.rates.norm() < 1e-9);
            assert!(a.iter().all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn ballistic_arc_recovers_gravity() {
        let tr =
            traj(240, |t| (Vector3::new(0.3 * t, 0.0, 1.0 + 2.0 * t - 0.5 * 9.81 * t * t), UnitQuaternion::IDENTITY));
        let rs = reconstruct(&tr, &FilterConfig::default()).unwrap();
        let mid = rs.len() / 2;
        assert_relative_eq!(rs.accel[mid][2], -9.81, max_relative = 1e-3);
        assert_relative_eq!(rs.states[mid].vel_body.x, 0.3, max_relative = 1e-6);
    }

    #[test]
    fn constant_rotation_rate_is_recovered() {
        let w = Vector3::new(0.0, 0.0, 3.0);
        let tr = traj(60, |t| (Vector3::zeros(), UnitQuaternion::from_rotation_vector(&(w * t))));
        let rs = reconstruct(&tr, &FilterConfig::disabled()).unwrap();
        for (s, a) in rs.states.iter().zip(&rs.accel) {
            assert!((s.rates - w).norm() < 1e-9);
            assert!(a[5].abs() < 1e-6);
        }
    }

    #[test]
    fn linear_in_position_streams() {
        let f1 = |t: f64| Vector3::new(0.1 * (3.0 * t).sin(), 0.02 * t, 0.05 * t * t);
        let f2 = |t: f64| Vector3::new(0.01 * t, -0.04 * (5.0 * t).cos(), 0.3);
        let q = UnitQuaternion::from_rotation_vector(&Vector3::new(0.1, 0.2, -0.3));
        let cfg = FilterConfig::default();
        let a = reconstruct(&traj(120, |t| (f1(t), q)), &cfg).unwrap();
        let b = reconstruct(&traj(120, |t| (f2(t), q)), &cfg).unwrap();
        let s = reconstruct(&traj(120, |t| (f1(t) + f2(t), q)), &cfg).unwrap();
        for k in 0..s.len() {
            assert!((a.accel_w[k] + b.accel_w[k] - s.accel_w[k]).norm() < 1e-9);
            assert!((a.states[k].vel_body + b.states[k].vel_body - s.states[k].vel_body).norm() < 1e-12);
        }
    }

    #[test]
    fn velocity_of_a_sinusoid_has_no_lag() {
        let w = 2.0 * core::f64::consts::PI * 4.0;
        let tr = traj(480, |t| (Vector3::new((w * t).sin(), 0.0, 0.0), UnitQuaternion::IDENTITY));
        let rs = reconstruct(&tr, &FilterConfig::default()).unwrap();
        let (mut s, mut c) = (0.0, 0.0);
        for k in 60..rs.len() - 60 {
            let v = rs.states[k].vel_body.x;
            s += v * (w * rs.t[k]).sin();
            c += v * (w * rs.t[k]).cos();
        }
        // velocity of sin is cos: phase lead of exactly pi/2
        let phase = c.atan2(s);
        assert!((phase - core::f64::consts::FRAC_PI_2).abs() < 1f64.to_radians());
    }

    #[test]
    fn rejects_short_and_gappy_input() {
        let tr = traj(8, |_| (Vector3::zeros(), UnitQuaternion::IDENTITY));
        assert_eq!(reconstruct(&tr, &FilterConfig::default()).unwrap_err(), Error::TooShort { len: 8, min: 9 });
        let mut samples = traj(20, |_| (Vector3::zeros(), UnitQuaternion::IDENTITY)).samples().to_vec();
        for s in samples.iter_mut().skip(10) {
            s.t += 0.1;
        }
        let tr = MocapTrajectory::new(samples, "gap").unwrap();
        assert!(matches!(reconstruct(&tr, &FilterConfig::default()), Err(Error::GapTooLarge { index: 10, .. })));
    }
}
