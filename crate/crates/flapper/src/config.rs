//! TOML vehicle parameters and scenario files.
//!
//! A parameter file overrides individual entries of the built-in profile:
//!
//! ```toml
//! m = 150e-6
//! J = [3.12e-9, 2.97e-9, 0.55e-9]
//! A_limits = [0.0, 250.0]
//! ```
//!
//! A scenario file has top-level `name`, `duration`, `seed` and the sections
//! `[initial]`, `[setpoint]`, `[[disturbance]]`, `[noise]`, `[sim]` and
//! `[metrics]`; see the bundled files under `scenarios/`.

use std::fs;
use std::path::{Path, PathBuf};

use flapper_core::control::{Setpoint, SetpointSchedule, VelocityFilter};
use flapper_core::dynamics::SimState;
use flapper_core::kinematics::EulerAngles321;
use flapper_core::sim::{disturbance_pulse, Disturbance, Feedback, NoiseConfig, Scenario};
use flapper_core::vehicle::{default_robofly_params, VehicleParams, ROBOFLY_PROFILE};
use flapper_core::Vector3;
use serde::Deserialize;

use crate::csvio;
use crate::error::{AppError, AppResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ParamsFile {
    profile: Option<String>,
    m: Option<f64>,
    m_M: Option<f64>,
    J: Option<[f64; 3]>,
    thrust_slope: Option<f64>,
    thrust_intercept: Option<f64>,
    roll_slope: Option<f64>,
    pitch_slope: Option<f64>,
    g: Option<f64>,
    A_limits: Option<[f64; 2]>,
    dA_limit: Option<f64>,
    Vo_limit: Option<f64>,
    V_bias: Option<f64>,
    flap_freq: Option<f64>,
}

pub fn parse_params(text: &str, origin: &Path) -> AppResult<VehicleParams> {
    let f: ParamsFile = toml::from_str(text).map_err(|e| AppError::format(origin, e.to_string()))?;
    if let Some(profile) = &f.profile {
        if profile != ROBOFLY_PROFILE {
            return Err(AppError::format(origin, format!("unknown profile '{profile}' (known: {ROBOFLY_PROFILE})")));
        }
    }
    let mut p = default_robofly_params();
    macro_rules! set {
        ($field:ident => $target:expr) => {
            if let Some(v) = f.$field {
                $target = v;
            }
        };
    }
    set!(m => p.mass);
    set!(m_M => p.marker_mass);
    set!(J => p.inertia);
    set!(thrust_slope => p.thrust_slope);
    set!(thrust_intercept => p.thrust_intercept);
    set!(roll_slope => p.roll_slope);
    set!(pitch_slope => p.pitch_slope);
    set!(g => p.gravity);
    set!(A_limits => p.amplitude_limits);
    set!(dA_limit => p.amplitude_diff_limit);
    set!(Vo_limit => p.offset_limit);
    set!(V_bias => p.bias_voltage);
    set!(flap_freq => p.flap_freq);
    p.validate().map_err(|e| AppError::format(origin, e.to_string()))?;
    Ok(p)
}

/// The built-in profile when `path` is `None`.
pub fn load_params(path: Option<&Path>) -> AppResult<VehicleParams> {
    match path {
        None => Ok(default_robofly_params()),
        Some(p) => parse_params(&read_text(p)?, p),
    }
}

pub fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    duration: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    initial: InitialSection,
    setpoint: SetpointSection,
    #[serde(default)]
    disturbance: Vec<DisturbanceSection>,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    metrics: MetricsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    #[serde(default)]
    pos: [f64; 3],
    #[serde(default)]
    vel_body: [f64; 3],
    /// Roll, pitch, yaw in radians.
    #[serde(default)]
    euler: [f64; 3],
    #[serde(default)]
    rates: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SetpointSection {
    Constant {
        pos: [f64; 3],
        #[serde(default)]
        vel: [f64; 3],
    },
    Circle {
        radius: f64,
        speed: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// CSV with columns t, x, y, z, vx, vy, vz; relative paths resolve against
    /// the scenario file's directory.
    Table { file: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    t_start: f64,
    duration: f64,
    /// Pulse strength in multiples of the vehicle weight.
    magnitude_g: Option<f64>,
    direction: Option<[f64; 3]>,
    /// Explicit world force, N; exclusive with `magnitude_g`.
    force: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    #[serde(default)]
    enabled: bool,
    #[serde(default = "default_pos_sigma")]
    pos_sigma: f64,
    #[serde(default = "default_att_sigma")]
    att_sigma: f64,
}

fn default_pos_sigma() -> f64 {
    NoiseConfig::default().pos_sigma
}

fn default_att_sigma() -> f64 {
    NoiseConfig::default().att_sigma
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseConfig::default();
        Self { enabled: n.enabled, pos_sigma: n.pos_sigma, att_sigma: n.att_sigma }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_rate")]
    control_rate: f64,
    #[serde(default)]
    feedback: FeedbackName,
    #[serde(default)]
    velocity_filter: VelocityFilterName,
}

fn default_dt() -> f64 {
    1.0 / 4800.0
}

fn default_rate() -> f64 {
    240.0
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            control_rate: default_rate(),
            feedback: Default::default(),
            velocity_filter: Default::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FeedbackName {
    #[default]
    Measured,
    Truth,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum VelocityFilterName {
    FirstDifference,
    #[default]
    MovingAverage2,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsSection {
    window: Option<[f64; 2]>,
    #[serde(default = "default_settle_tol")]
    settle_tol: f64,
}

fn default_settle_tol() -> f64 {
    1e-3
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { window: None, settle_tol: default_settle_tol() }
    }
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

/// Parses a scenario. `base_dir` resolves relative table paths.
pub fn parse_scenario(text: &str, origin: &Path, base_dir: Option<&Path>, p: &VehicleParams) -> AppResult<Scenario> {
    let bad = |m: String| AppError::format(origin, m);
    let f: ScenarioFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    let [roll, pitch, yaw] = f.initial.euler;
    let initial = SimState {
        pos: v3(f.initial.pos),
        vel_body: v3(f.initial.vel_body),
        euler: EulerAngles321::new(roll, pitch, yaw).map_err(|e| bad(format!("[initial] {e}")))?,
        rates: v3(f.initial.rates),
    };
    let setpoint = match f.setpoint {
        SetpointSection::Constant { pos, vel } => SetpointSchedule::Constant(Setpoint::new(v3(pos), v3(vel))?),
        SetpointSection::Circle { radius, speed, center } => {
            SetpointSchedule::Circle { radius, speed, center_w: v3(center) }
        }
        SetpointSection::Table { file } => {
            let path = match base_dir {
                Some(d) if file.is_relative() => d.join(&file),
                _ => file,
            };
            SetpointSchedule::Table(csvio::read_setpoint_csv(&path)?)
        }
    };
    let mut disturbances = Vec::new();
    for (i, d) in f.disturbance.iter().enumerate() {
        let entry = match (d.magnitude_g, d.force) {
            (Some(g), None) => {
                disturbance_pulse(g, d.duration, v3(d.direction.unwrap_or([1.0, 0.0, 0.0])), p, d.t_start)
                    .map_err(|e| bad(format!("disturbance {i}: {e}")))?
            }
            (None, Some(force)) => {
                if !(d.duration > 0.0) {
                    return Err(bad(format!("disturbance {i}: duration must be positive")));
                }
                Disturbance { t_start: d.t_start, t_end: d.t_start + d.duration, force_w: v3(force) }
            }
            _ => return Err(bad(format!("disturbance {i}: give exactly one of magnitude_g or force"))),
        };
        disturbances.push(entry);
    }
    let sc = Scenario {
        name: f.name,
        duration: f.duration,
        initial,
        setpoint,
        disturbances,
        noise: NoiseConfig { enabled: f.noise.enabled, pos_sigma: f.noise.pos_sigma, att_sigma: f.noise.att_sigma },
        dt: f.sim.dt,
        control_rate: f.sim.control_rate,
        seed: f.seed,
        feedback: match f.sim.feedback {
            FeedbackName::Measured => Feedback::Measured,
            FeedbackName::Truth => Feedback::Truth,
        },
        velocity_filter: match f.sim.velocity_filter {
            VelocityFilterName::FirstDifference => VelocityFilter::FirstDifference,
            VelocityFilterName::MovingAverage2 => VelocityFilter::MovingAverage2,
        },
        unmodeled: Default::default(),
        coriolis: Default::default(),
        metrics_window: f.metrics.window.map(|[a, b]| (a, b)),
        settle_tol: f.metrics.settle_tol,
    };
    sc.validate().map_err(|e| bad(e.to_string()))?;
    Ok(sc)
}

/// Scenario files shipped with the binary, by name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("hover", include_str!("../scenarios/hover.scenario")),
    ("circle", include_str!("../scenarios/circle.scenario")),
    ("disturbance", include_str!("../scenarios/disturbance.scenario")),
];

pub fn bundled_scenario(name: &str, p: &VehicleParams) -> Option<AppResult<Scenario>> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_scenario(text, Path::new(&format!("<bundled {n}>")), None, p))
}

/// A path to a scenario file, or the name of a bundled scenario.
pub fn load_scenario(name_or_path: &str, p: &VehicleParams) -> AppResult<Scenario> {
    let path = Path::new(name_or_path);
    if path.exists() {
        return parse_scenario(&read_text(path)?, path, path.parent(), p);
    }
    let stem = name_or_path.strip_suffix(".scenario").unwrap_or(name_or_path);
    bundled_scenario(stem, p).unwrap_or_else(|| {
        let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
        Err(AppError::Input(format!(
            "no scenario file '{name_or_path}' and no bundled scenario of that name (bundled: {})",
            names.join(", ")
        )))
    })
}
