//! Measured versus model-predicted body accelerations.

use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use super::reconstruct::ReconstructedStates;
use crate::dynamics::{state_derivative, UnmodeledTerms};
use crate::vehicle::{cmd_to_wrench, VehicleParams};
use crate::{Error, Result};

pub const AXIS_NAMES: [&str; 6] = ["u_dot", "v_dot", "w_dot", "p_dot", "q_dot", "r_dot"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisError {
    /// RMS of `measured - predicted`.
    pub rms_error: f64,
    /// RMS of the measured signal.
    pub rms_measured: f64,
    pub rms_predicted: f64,
}

impl AxisError {
    /// Error relative to the measured signal; infinite for a silent axis with
    /// nonzero error.
    pub fn relative(&self) -> f64 {
        if self.rms_measured > 0.0 {
            self.rms_error / self.rms_measured
        } else if self.rms_error == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub axes: [AxisError; 6],
    pub t: Vec<f64>,
    pub measured: Vec<[f64; 6]>,
    pub predicted: Vec<[f64; 6]>,
}

/// Predicts accelerations from the reconstructed state and recorded commands
/// with the unmodeled force and moment set to zero.
pub fn validate_model(rs: &ReconstructedStates, p: &VehicleParams) -> Result<ValidationReport> {
    if rs.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let cmds = rs.cmds.as_ref().ok_or(Error::MissingCommands)?;
    if cmds.len() != rs.len() {
        return Err(Error::MissingCommands);
    }
    let mut predicted = Vec::with_capacity(rs.len());
    for (s, c) in rs.states.iter().zip(cmds) {
        let w = cmd_to_wrench(p, c);
        predicted.push(state_derivative(p, s, &w, &UnmodeledTerms::ZERO, &Vector3::zeros())?.body_accelerations());
    }
    let n = rs.len() as f64;
    let axes = core::array::from_fn(|i| {
        let (mut e, mut m, mut q) = (0.0, 0.0, 0.0);
        for (a, b) in rs.accel.iter().zip(&predicted) {
            e += (a[i] - b[i]).powi(2);
            m += a[i] * a[i];
            q += b[i] * b[i];
        }
        AxisError { rms_error: (e / n).sqrt(), rms_measured: (m / n).sqrt(), rms_predicted: (q / n).sqrt() }
    });
    Ok(ValidationReport { axes, t: rs.t.clone(), measured: rs.accel.clone(), predicted })
}
