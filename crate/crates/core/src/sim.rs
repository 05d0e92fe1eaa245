//! Closed-loop scenario runner.
//!
//! Physics is integrated with RK4 at a fixed step; the controller runs at the
//! control rate on a mocap-like measurement of the true pose and its command
//! is held between ticks. Sensor noise comes from a seeded ChaCha8 stream, so
//! a scenario and its seed fully determine the log.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::control::{
    control_step, CtrlState, Setpoint, SetpointSchedule, StateEstimator, StateSource, VelocityFilter,
};
use crate::dynamics::{rk4_step_with, state_derivative_with, CoriolisForm, SimState, UnmodeledTerms, MAX_DT};
use crate::kinematics::{EulerAngles321, UnitQuaternion};
use crate::lqr::GainMatrix;
use crate::vehicle::{ActuatorCmd, VehicleParams, Wrench};
use crate::{Error, Result};

/// Abort thresholds for a diverging run.
pub const BLOWUP_POSITION: f64 = 10.0;
pub const BLOWUP_RATE: f64 = 1e4;

/// Name of the pseudo-random generator used for sensor noise.
pub const RNG_NAME: &str = "ChaCha8";

/// Constant world-frame force applied on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub t_start: f64,
    pub t_end: f64,
    pub force_w: Vector3<f64>,
}

impl Disturbance {
    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// World-frame force pulse of `magnitude_g` times the vehicle weight.
///
/// A non-unit direction is normalized (with a warning); a zero direction or a
/// non-positive magnitude or duration is rejected.
pub fn disturbance_pulse(
    magnitude_g: f64,
    duration: f64,
    direction_w: Vector3<f64>,
    p: &VehicleParams,
    t_start: f64,
) -> Result<Disturbance> {
    if !(magnitude_g > 0.0 && magnitude_g.is_finite()) {
        return Err(Error::InvalidParameter(format!("pulse magnitude must be positive, got {magnitude_g} g")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("pulse duration must be positive, got {duration} s")));
    }
    let n = direction_w.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidParameter("pulse direction must be a nonzero vector".into()));
    }
    if (n - 1.0).abs() > 1e-9 {
        log::warn!("pulse direction has norm {n}; normalizing");
    }
    Ok(Disturbance {
        t_start,
        t_end: t_start + duration,
        force_w: direction_w / n * (magnitude_g * 9.81 * p.total_mass()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Position standard deviation per axis, m.
    pub pos_sigma: f64,
    /// Attitude standard deviation per axis of a small rotation vector, rad.
    pub att_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { enabled: false, pos_sigma: 0.5e-3, att_sigma: 0.2f64.to_radians() }
    }
}

/// What the controller sees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Feedback {
    /// Differenced (and optionally noisy) pose measurements.
    #[default]
    Measured,
    /// The true state, bypassing sensor and estimator.
    Truth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub initial: SimState,
    pub setpoint: SetpointSchedule,
    pub disturbances: Vec<Disturbance>,
    pub noise: NoiseConfig,
    pub dt: f64,
    pub control_rate: f64,
    pub seed: u64,
    pub feedback: Feedback,
    pub velocity_filter: VelocityFilter,
    pub unmodeled: UnmodeledTerms,
    pub coriolis: CoriolisForm,
    /// Window used by the summary metrics; the whole run when `None`.
    pub metrics_window: Option<(f64, f64)>,
    /// Position tolerance for the settling time, m.
    pub settle_tol: f64,
}

impl Scenario {
    /// Hover at `setpoint` starting from `initial`, with default settings.
    pub fn hover(name: &str, duration: f64, initial: SimState, setpoint: Vector3<f64>) -> Self {
        Self {
            name: name.into(),
            duration,
            initial,
            setpoint: SetpointSchedule::Constant(Setpoint::hold(setpoint)),
            disturbances: Vec::new(),
            noise: NoiseConfig::default(),
            dt: 1.0 / 4800.0,
            control_rate: 240.0,
            seed: 0,
            feedback: Feedback::Measured,
            velocity_filter: VelocityFilter::default(),
            unmodeled: UnmodeledTerms::ZERO,
            coriolis: CoriolisForm::CrossProduct,
            metrics_window: None,
            settle_tol: 1e-3,
        }
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.control_rate
    }

    /// Physics substeps per control tick.
    pub fn substeps(&self) -> Result<usize> {
        let tc = self.control_period();
        let n = (tc / self.dt).round();
        if !(n >= 1.0) || (n * self.dt - tc).abs() > 1e-9 {
            return Err(Error::InvalidScenario(format!(
                "physics step {} does not divide the control period {tc}",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn ticks(&self) -> usize {
        (self.duration * self.control_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidScenario(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.control_rate > 0.0 && self.control_rate.is_finite()) {
            return Err(Error::InvalidScenario(format!("control rate must be positive, got {}", self.control_rate)));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidTimestep(self.dt));
        }
        self.substeps()?;
        self.setpoint.validate()?;
        for d in &self.disturbances {
            if !(d.t_end > d.t_start) || !d.force_w.iter().all(|f| f.is_finite()) {
                return Err(Error::InvalidScenario(format!("bad disturbance window [{}, {})", d.t_start, d.t_end)));
            }
        }
        if self.noise.enabled && !(self.noise.pos_sigma >= 0.0 && self.noise.att_sigma >= 0.0) {
            return Err(Error::InvalidScenario("noise standard deviations must be non-negative".into()));
        }
        if let Some((t0, t1)) = self.metrics_window {
            if !(t1 > t0) {
                return Err(Error::WindowOutOfRange { t0, t1 });
            }
        }
        if !(self.settle_tol > 0.0) {
            return Err(Error::InvalidScenario("settling tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn external_force(&self, t: f64) -> Vector3<f64> {
        self.disturbances.iter().filter(|d| d.active(t)).map(|d| d.force_w).sum()
    }
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub truth: SimState,
    pub ctrl: CtrlState,
    pub setpoint: Setpoint,
    pub cmd: ActuatorCmd,
    pub wrench: Wrench,
    pub saturated: bool,
    pub ext_force_w: Vector3<f64>,
    /// True body accelerations `(u', v', w', p', q', r')` at the tick, under the
    /// command issued at that tick.
    pub accel: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub name: String,
    pub seed: u64,
    pub control_rate: f64,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// A run that diverged; carries everything logged up to the failure.
#[derive(Debug, Clone)]
pub struct SimAbort {
    pub log: RunLog,
    pub time: f64,
    pub diagnostic: String,
}

impl fmt::Display for SimAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run '{}' aborted at t = {:.4} s: {}", self.log.name, self.time, self.diagnostic)
    }
}

impl From<Error> for SimAbort {
    fn from(e: Error) -> Self {
        Self {
            log: RunLog { name: String::new(), seed: 0, control_rate: 0.0, rows: Vec::new() },
            time: 0.0,
            diagnostic: format!("{e}"),
        }
    }
}

/// Mocap-like pose sensor. Position and attitude noise draw from separate
/// ChaCha8 streams of the same seed, so changing one standard deviation leaves
/// the other channel's realization untouched.
struct Sensor {
    enabled: bool,
    cfg: NoiseConfig,
    pos_rng: ChaCha8Rng,
    att_rng: ChaCha8Rng,
}

impl Sensor {
    fn new(cfg: &NoiseConfig, seed: u64) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        Self { enabled: cfg.enabled, cfg: *cfg, pos_rng: stream(0), att_rng: stream(1) }
    }

    fn measure(&mut self, s: &SimState) -> (Vector3<f64>, [f64; 4]) {
        let mut q = UnitQuaternion::from_euler(&s.euler);
        if !self.enabled {
            return (s.pos, q.canonical().components());
        }
        let draw3 = |rng: &mut ChaCha8Rng, sigma: f64| -> Vector3<f64> {
            let mut v = Vector3::zeros();
            for i in 0..3 {
                let z: f64 = StandardNormal.sample(rng);
                v[i] = sigma * z;
            }
            v
        };
        let pos = s.pos + draw3(&mut self.pos_rng, self.cfg.pos_sigma);
        let dv = draw3(&mut self.att_rng, self.cfg.att_sigma);
        q = q.mul(&UnitQuaternion::from_rotation_vector(&dv));
        (pos, q.canonical().components())
    }
}

fn check_state(s: &SimState) -> core::result::Result<(), String> {
    let a = s.to_array();
    if !a.iter().all(|x| x.is_finite()) {
        return Err("non-finite state".into());
    }
    if s.pos.norm() > BLOWUP_POSITION {
        return Err(format!("position norm {:.3} m exceeds {BLOWUP_POSITION} m", s.pos.norm()));
    }
    if let Some(r) = s.rates.iter().find(|r| r.abs() > BLOWUP_RATE) {
        return Err(format!("body rate {r:.3e} rad/s exceeds {BLOWUP_RATE:e}"));
    }
    Ok(())
}

/// Runs the scenario to completion, logging one row per control tick
/// including both end points.
pub fn run_scenario(sc: &Scenario, p: &VehicleParams, k: &GainMatrix) -> core::result::Result<RunLog, SimAbort> {
    sc.validate()?;
    p.validate()?;
    let substeps = sc.substeps()?;
    let tc = sc.control_period();
    let h = tc / substeps as f64;
    let mut sensor = Sensor::new(&sc.noise, sc.seed);
    let mut est = StateEstimator::new(sc.velocity_filter);
    let mut log = RunLog {
        name: sc.name.clone(),
        seed: sc.seed,
        control_rate: sc.control_rate,
        rows: Vec::with_capacity(sc.ticks() + 1),
    };
    let mut state = sc.initial;
    let abort = |log: RunLog, time: f64, diagnostic: String| SimAbort { log, time, diagnostic };
    if let Err(d) = check_state(&state) {
        return Err(abort(log, 0.0, d));
    }

    for tick in 0..=sc.ticks() {
        let t = tick as f64 * tc;
        let ctrl = match sc.feedback {
            Feedback::Truth => CtrlState {
                time: t,
                source: StateSource::Sim,
                pos_w: state.pos,
                vel_w: state.vel_world(),
                euler: state.euler,
                rates_b: state.rates,
            },
            Feedback::Measured => {
                let (pos, quat) = sensor.measure(&state);
                match est.update(t, pos, quat) {
                    Ok(mut c) => {
                        c.source = StateSource::Sim;
                        c
                    }
                    Err(e) => return Err(abort(log, t, format!("state estimate failed: {e}"))),
                }
            }
        };
        let sp = sc.setpoint.at(t);
        let out = control_step(k, &ctrl, &sp, p);
        let ext = sc.external_force(t);
        let accel = match state_derivative_with(p, &state, &out.wrench, &sc.unmodeled, &ext, sc.coriolis) {
            Ok(d) => d.body_accelerations(),
            Err(e) => return Err(abort(log, t, format!("{e}"))),
        };
        log.rows.push(LogRow {
            t,
            truth: state,
            ctrl,
            setpoint: sp,
            cmd: out.cmd,
            wrench: out.wrench,
            saturated: out.saturated,
            ext_force_w: ext,
            accel,
        });
        if tick == sc.ticks() {
            break;
        }
        for j in 0..substeps {
            let ts = t + j as f64 * h;
            let ext = sc.external_force(ts);
            state = match rk4_step_with(p, &state, &out.wrench, &sc.unmodeled, &ext, h, sc.coriolis) {
                Ok(s) => s,
                Err(e) => return Err(abort(log, ts + h, format!("{e}"))),
            };
            if let Err(d) = check_state(&state) {
                return Err(abort(log, ts + h, d));
            }
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// RMS of the 3D position error against the active setpoint, m.
    pub rms_pos_3d: f64,
    pub rms_pos_xy: f64,
    /// Largest `|phi|` or `|theta|`, rad.
    pub max_attitude: f64,
    /// Largest `||V_b||`, m/s.
    pub max_body_speed: f64,
    /// Largest 3D position error, m.
    pub max_pos_err: f64,
    /// 3D position error at the last sample of the window, m.
    pub final_pos_err: f64,
    /// Time after the window start from which the 3D error stays within the
    /// tolerance; `None` if it never does.
    pub settling_time: Option<f64>,
    /// Fraction of ticks with a saturated command.
    pub saturation_duty: f64,
    pub samples: usize,
}

/// Summary statistics over the rows with `t0 <= t <= t1`.
pub fn metrics(log: &RunLog, window: (f64, f64), settle_tol: f64) -> Result<RunMetrics> {
    let (t0, t1) = window;
    if !(t1 >= t0) {
        return Err(Error::WindowOutOfRange { t0, t1 });
    }
    let eps = 1e-9;
    let rows: Vec<&LogRow> = log.rows.iter().filter(|r| r.t >= t0 - eps && r.t <= t1 + eps).collect();
    if rows.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = rows.len() as f64;
    let mut sum3 = 0.0;
    let mut sum2 = 0.0;
    let mut m = RunMetrics {
        rms_pos_3d: 0.0,
        rms_pos_xy: 0.0,
        max_attitude: 0.0,
        max_body_speed: 0.0,
        max_pos_err: 0.0,
        final_pos_err: 0.0,
        settling_time: None,
        saturation_duty: 0.0,
        samples: rows.len(),
    };
    let mut last_outside: Option<usize> = None;
    let mut sat = 0usize;
    for (i, r) in rows.iter().enumerate() {
        let e = r.setpoint.pos_w - r.truth.pos;
        let e3 = e.norm_squared();
        sum3 += e3;
        sum2 += e.x * e.x + e.y * e.y;
        m.max_pos_err = m.max_pos_err.max(e3.sqrt());
        m.max_attitude = m.max_attitude.max(r.truth.euler.roll().abs()).max(r.truth.euler.pitch().abs());
        m.max_body_speed = m.max_body_speed.max(r.truth.vel_body.norm());
        if e3.sqrt() > settle_tol {
            last_outside = Some(i);
        }
        sat += r.saturated as usize;
    }
    m.rms_pos_3d = (sum3 / n).sqrt();
    m.rms_pos_xy = (sum2 / n).sqrt();
    let last = rows[rows.len() - 1];
    m.final_pos_err = (last.setpoint.pos_w - last.truth.pos).norm();
    m.settling_time = match last_outside {
        None => Some(0.0),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].t - rows[0].t),
        Some(_) => None,
    };
    m.saturation_duty = sat as f64 / n;
    Ok(m)
}

/// [`metrics`] over the scenario's own window and tolerance.
pub fn scenario_metrics(sc: &Scenario, log: &RunLog) -> Result<RunMetrics> {
    metrics(log, sc.metrics_window.unwrap_or((0.0, sc.duration)), sc.settle_tol)
}

/// Start state displaced from hover.
pub fn offset_state(pos: Vector3<f64>, roll: f64, pitch: f64) -> Result<SimState> {
    Ok(SimState { euler: EulerAngles321::new(roll, pitch, 0.0)?, ..SimState::at_rest(pos) })
}
