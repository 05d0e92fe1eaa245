//! Simulator logs replayed through the reconstruction and validation pipeline.

use flapper_core::control::SetpointSchedule;
use flapper_core::dynamics::SimState;
use flapper_core::lqr::{lqr_gain, LqrWeights};
use flapper_core::pipeline::{
    flight_envelope, reconstruct, validate_model, CommandTrack, EnvelopeConfig, FilterConfig, MocapTrajectory,
    ReconstructedStates, ValidationReport,
};
use flapper_core::sim::{run_scenario, RunLog, Scenario};
use flapper_core::vehicle::default_robofly_params;
use flapper_core::Error;
use nalgebra::Vector3;

fn circle_log() -> RunLog {
    let p = default_robofly_params();
    let k = lqr_gain(&p, &LqrWeights::default()).unwrap().k;
    let mut sc = Scenario::hover("circle", 4.5, SimState::at_rest(Vector3::new(0.1, 0.0, 0.0)), Vector3::zeros());
    sc.setpoint = SetpointSchedule::Circle { radius: 0.1, speed: 0.25, center_w: Vector3::zeros() };
    run_scenario(&sc, &p, &k).unwrap()
}

fn replay(tr: &MocapTrajectory, log: &RunLog) -> ReconstructedStates {
    let mut rs = reconstruct(tr, &FilterConfig::default()).unwrap();
    rs.attach_commands(&CommandTrack::from_run_log(log).unwrap()).unwrap();
    rs.restrict(0.45, 4.05).unwrap()
}

fn validate(rs: &ReconstructedStates) -> ValidationReport {
    validate_model(rs, &default_robofly_params()).unwrap()
}

#[test]
fn noiseless_replay_matches_the_model() {
    let log = circle_log();
    let rs = replay(&MocapTrajectory::from_run_log(&log).unwrap(), &log);
    let report = validate(&rs);
    for (i, a) in report.axes.iter().enumerate() {
        assert!(a.relative() < 0.01, "axis {i}: {a:?}");
    }
    // reconstructed accelerations also track the simulator's own derivative
    let truth: Vec<[f64; 6]> =
        log.rows.iter().filter(|r| r.t >= 0.45 - 1e-9 && r.t <= 4.05 + 1e-9).map(|r| r.accel).collect();
    assert_eq!(truth.len(), rs.len());
    for axis in 0..6 {
        let (mut e, mut s) = (0.0, 0.0);
        for (m, t) in rs.accel.iter().zip(&truth) {
            e += (m[axis] - t[axis]).powi(2);
            s += t[axis].powi(2);
        }
        assert!((e / s).sqrt() < 0.02, "axis {axis}: {}", (e / s).sqrt());
    }
}

#[test]
fn position_noise_degrades_translational_axes() {
    let log = circle_log();
    let clean = MocapTrajectory::from_run_log(&log).unwrap();
    let noisy = clean.with_noise(2e-3, 0.0, 7).unwrap();
    let a = validate(&replay(&clean, &log));
    let b = validate(&replay(&noisy, &log));
    for i in 0..3 {
        assert!(b.axes[i].rms_error.is_finite());
        assert!(b.axes[i].rms_error > a.axes[i].rms_error, "axis {i}");
    }
}

#[test]
fn empty_or_commandless_input_is_rejected() {
    let log = circle_log();
    let rs = reconstruct(&MocapTrajectory::from_run_log(&log).unwrap(), &FilterConfig::default()).unwrap();
    assert_eq!(validate_model(&rs, &default_robofly_params()).unwrap_err(), Error::MissingCommands);
    let empty =
        ReconstructedStates { t: vec![], states: vec![], accel: vec![], accel_w: vec![], cmds: Some(vec![]), ..rs };
    assert_eq!(validate_model(&empty, &default_robofly_params()).unwrap_err(), Error::EmptyWindow);
}

#[test]
fn envelope_of_a_replay_conserves_mass() {
    let log = circle_log();
    let rs = replay(&MocapTrajectory::from_run_log(&log).unwrap(), &log);
    let h = flight_envelope(&rs, &EnvelopeConfig::default()).unwrap();
    assert_eq!(h.total as usize, rs.len());
    assert_eq!(h.counts.iter().flatten().sum::<u64>(), h.total);
}
