//! Offline motion-capture processing: reconstruction of body states and
//! accelerations, model validation, body-offset estimation and flight-envelope
//! statistics.

mod envelope;
mod filter;
mod offset;
mod reconstruct;
mod validate;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::kinematics::UnitQuaternion;
use crate::sim::RunLog;
use crate::vehicle::ActuatorCmd;
use crate::{Error, Result};

pub use envelope::{envelope_of_states, flight_envelope, EnvelopeConfig, Histogram, SpeedMeasure};
pub use filter::{filtfilt, Butterworth2, FilterConfig};
pub use offset::{estimate_body_offset, BodyOffset, MAX_OFFSET_TILT, MIN_NET_ACCEL_G};
pub use reconstruct::{reconstruct, ReconstructedStates, MIN_SAMPLES};
pub use validate::{validate_model, AxisError, ValidationReport, AXIS_NAMES};

/// Nominal motion-capture rate, Hz.
pub const NOMINAL_RATE: f64 = 240.0;
/// Quaternion norm tolerance for recorded poses.
pub const QUAT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MocapSample {
    pub t: f64,
    pub pos: Vector3<f64>,
    /// Body-to-world attitude, canonicalized to `w >= 0`.
    pub quat: UnitQuaternion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MocapTrajectory {
    samples: Vec<MocapSample>,
    /// Median sample rate, Hz.
    pub sample_rate: f64,
    pub marker_mass: f64,
    pub source: String,
    /// Indices `i` where the step from sample `i - 1` exceeds two periods.
    pub gaps: Vec<usize>,
}

impl MocapTrajectory {
    /// Validates raw rows `(t, position, scalar-first quaternion)`.
    pub fn from_rows(rows: &[(f64, [f64; 3], [f64; 4])], source: &str) -> Result<Self> {
        let mut samples = Vec::with_capacity(rows.len());
        for (i, (t, p, q)) in rows.iter().enumerate() {
            if !t.is_finite() || !p.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParameter(format!("row {i}: non-finite value")));
            }
            let quat = UnitQuaternion::new_checked(q[0], q[1], q[2], q[3], QUAT_TOL)
                .map_err(|e| Error::InvalidParameter(format!("row {i}: {e}")))?;
            samples.push(MocapSample { t: *t, pos: Vector3::from_column_slice(p), quat });
        }
        Self::new(samples, source)
    }

    pub fn new(mut samples: Vec<MocapSample>, source: &str) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyWindow);
        }
        for i in 1..samples.len() {
            if !(samples[i].t > samples[i - 1].t) {
                return Err(Error::NonMonotoneTime { index: i });
            }
        }
        for s in &mut samples {
            s.quat = s.quat.canonical();
        }
        let mut steps: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        let sample_rate = if steps.is_empty() {
            NOMINAL_RATE
        } else {
            let mut sorted = steps.clone();
            sorted.sort_by(f64::total_cmp);
            1.0 / sorted[sorted.len() / 2]
        };
        let period = 1.0 / sample_rate;
        let gaps =
            steps.drain(..).enumerate().filter(|(_, h)| *h > 2.0 * period * (1.0 + 1e-9)).map(|(i, _)| i + 1).collect();
        Ok(Self { samples, sample_rate, marker_mass: 0.0, source: source.into(), gaps })
    }

    /// True poses of a simulator log, one sample per control tick.
    pub fn from_run_log(log: &RunLog) -> Result<Self> {
        let samples = log
            .rows
            .iter()
            .map(|r| MocapSample { t: r.t, pos: r.truth.pos, quat: UnitQuaternion::from_euler(&r.truth.euler) })
            .collect();
        Self::new(samples, &log.name)
    }

    pub fn samples(&self) -> &[MocapSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    /// Copy with i.i.d. Gaussian position noise and small-rotation attitude
    /// noise drawn from a seeded ChaCha8 stream.
    pub fn with_noise(&self, pos_sigma: f64, att_sigma: f64, seed: u64) -> Result<Self> {
        let bad = |s: f64| Error::InvalidParameter(format!("bad noise sigma {s}"));
        let np = Normal::new(0.0, pos_sigma).map_err(|_| bad(pos_sigma))?;
        let na = Normal::new(0.0, att_sigma).map_err(|_| bad(att_sigma))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for s in &mut out.samples {
            for i in 0..3 {
                s.pos[i] += np.sample(&mut rng);
            }
            let dv = Vector3::new(na.sample(&mut rng), na.sample(&mut rng), na.sample(&mut rng));
            s.quat = s.quat.mul(&UnitQuaternion::from_rotation_vector(&dv)).canonical();
        }
        Ok(out)
    }

    /// Concatenates trajectories in time, shifting each so it starts one
    /// nominal period after the previous one ends.
    pub fn stack(parts: &[MocapTrajectory]) -> Result<Self> {
        let mut samples = Vec::new();
        let mut offset = 0.0;
        for (k, tr) in parts.iter().enumerate() {
            let (t0, t1) = tr.span();
            let shift = if k == 0 { 0.0 } else { offset - t0 };
            samples.extend(tr.samples.iter().map(|s| MocapSample { t: s.t + shift, ..*s }));
            offset = t1 + shift + 1.0 / tr.sample_rate;
        }
        Self::new(samples, "stacked")
    }
}

/// Recorded actuator commands, held constant from each timestamp to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandTrack {
    pub times: Vec<f64>,
    pub cmds: Vec<ActuatorCmd>,
}

impl CommandTrack {
    pub fn new(times: Vec<f64>, cmds: Vec<ActuatorCmd>) -> Result<Self> {
        if times.len() != cmds.len() {
            return Err(Error::Dimension(format!("{} command times for {} commands", times.len(), cmds.len())));
        }
        if times.is_empty() {
            return Err(Error::MissingCommands);
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) {
                return Err(Error::NonMonotoneTime { index: i });
            }
        }
        Ok(Self { times, cmds })
    }

    pub fn from_run_log(log: &RunLog) -> Result<Self> {
        Self::new(log.rows.iter().map(|r| r.t).collect(), log.rows.iter().map(|r| r.cmd).collect())
    }

    /// Zero-order-hold lookup; `None` before the first command.
    pub fn at(&self, t: f64) -> Option<ActuatorCmd> {
        // tolerate timestamps that differ only by rounding
        let i = self.times.partition_point(|&ti| ti <= t + 1e-9);
        if i == 0 {
            None
        } else {
            Some(self.cmds[i - 1])
        }
    }

    /// Concatenates tracks with the same time shifts as [`MocapTrajectory::stack`].
    pub fn stack(parts: &[(CommandTrack, &MocapTrajectory)]) -> Result<Self> {
        let mut times = Vec::new();
        let mut cmds = Vec::new();
        let mut offset = 0.0;
        for (k, (track, tr)) in parts.iter().enumerate() {
            let (t0, t1) = tr.span();
            let shift = if k == 0 { 0.0 } else { offset - t0 };
            times.extend(track.times.iter().map(|t| t + shift));
            cmds.extend_from_slice(&track.cmds);
            offset = t1 + shift + 1.0 / tr.sample_rate;
        }
        Self::new(times, cmds)
    }
}
