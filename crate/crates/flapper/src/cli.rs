//! Argument parsing and the four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use flapper_core::lqr::{lqr_gain, GainMatrix, InputUnits, LqrWeights, STATE_DIM};
use flapper_core::pipeline::{
    estimate_body_offset, flight_envelope, reconstruct, validate_model, EnvelopeConfig, FilterConfig, Histogram,
    MocapTrajectory, ReconstructedStates, SpeedMeasure,
};
use flapper_core::sim::{run_scenario, scenario_metrics};
use flapper_core::vehicle::VehicleParams;
use log::info;

use crate::config::{load_params, load_scenario};
use crate::csvio::{self, MocapCsvOptions};
use crate::error::{AppError, AppResult};
use crate::report;

#[derive(Debug, Parser)]
#[command(
    name = "flapper",
    version,
    about = "LQR synthesis, closed-loop simulation and flight-data analysis for an insect-scale flapping-wing robot"
)]
pub struct Cli {
    /// Vehicle parameter file (TOML); the built-in profile when omitted.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print nothing but errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the hover LQR gain.
    Gains(GainsArgs),
    /// Run a closed-loop scenario.
    Simulate(SimulateArgs),
    /// Compare measured and model-predicted accelerations.
    Validate(ValidateArgs),
    /// Tilt/speed occupancy histogram of recorded flights.
    Envelope(EnvelopeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitsArg {
    Volts,
    Wrench,
}

#[derive(Debug, Args)]
pub struct GainsArgs {
    /// Diagonal of Q, 10 comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// Diagonal of R, 3 comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub r: Option<Vec<f64>>,
    /// What R penalizes.
    #[arg(long, value_enum, default_value = "volts")]
    pub input_units: UnitsArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file, or the name of a bundled scenario (hover, circle, disturbance).
    pub scenario: String,
    /// Gain CSV written by `gains`; synthesized with the default weights when omitted.
    #[arg(long)]
    pub gain: Option<PathBuf>,
    /// Overrides the scenario's sensor-noise switch.
    #[arg(long, value_enum)]
    pub noise: Option<Toggle>,
    /// Overrides the physics step, s.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MocapArgs {
    /// Quaternion columns are ordered qx, qy, qz, qw.
    #[arg(long)]
    pub scalar_last: bool,
    /// Quaternions map world vectors into the body frame.
    #[arg(long)]
    pub world_to_body: bool,
}

impl MocapArgs {
    fn options(&self) -> MocapCsvOptions {
        MocapCsvOptions { scalar_last: self.scalar_last, world_to_body: self.world_to_body }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Mocap CSV files (t,x,y,z,qw,qx,qy,qz); several files are stacked in time.
    #[arg(required = true)]
    pub data: Vec<PathBuf>,
    /// Command CSV (t,A,dA,Vo) for each data file, in the same order.
    #[arg(long, required = true, num_args = 1..)]
    pub commands: Vec<PathBuf>,
    /// Low-pass cutoffs to report, Hz; `0` disables filtering. The first one
    /// is written as the time-series CSV.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub cutoff: Vec<f64>,
    /// Restrict the comparison to `T0,T1` on the stacked time axis, s.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub window: Option<Vec<f64>>,
    /// Also estimate the thrust-axis offset over this window of the first file, `T0,T1` in s.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub offset_window: Option<Vec<f64>>,
    #[command(flatten)]
    pub mocap: MocapArgs,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    /// Mocap CSV files.
    #[arg(required = true)]
    pub data: Vec<PathBuf>,
    /// Tilt bin edges, degrees.
    #[arg(long, value_delimiter = ',')]
    pub tilt_edges: Option<Vec<f64>>,
    /// Speed bin edges, m/s.
    #[arg(long, value_delimiter = ',')]
    pub speed_edges: Option<Vec<f64>>,
    /// Speed measure on the second axis.
    #[arg(long, value_enum, default_value = "horizontal")]
    pub speed: SpeedArg,
    /// Low-pass cutoff used while reconstructing velocities, Hz; `0` disables it.
    #[arg(long, default_value_t = 20.0)]
    pub cutoff: f64,
    #[command(flatten)]
    pub mocap: MocapArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpeedArg {
    Horizontal,
    Total,
}

/// Parses an argument list (program name first) and runs it, for callers
/// that drive the CLI in-process.
pub fn run_from<I, T>(args: I) -> AppResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args).map_err(|e| AppError::Input(e.to_string()))?)
}

/// Runs the chosen subcommand.
pub fn run(cli: Cli) -> AppResult<()> {
    let params = load_params(cli.params.as_deref())?;
    fs::create_dir_all(&cli.out).map_err(|e| AppError::io(&cli.out, e))?;
    let ctx = Ctx { params, out: cli.out, seed: cli.seed, quiet: cli.quiet };
    match &cli.command {
        Command::Gains(a) => gains(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Validate(a) => validate(&ctx, a),
        Command::Envelope(a) => envelope(&ctx, a),
    }
}

struct Ctx {
    params: VehicleParams,
    out: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn save_text(&self, name: &str, text: &str) -> AppResult<PathBuf> {
        let p = self.path(name);
        csvio::atomic_write(&p, text.as_bytes())?;
        Ok(p)
    }
}

fn wrote(p: &Path) {
    info!("wrote {}", p.display());
}

fn weights(a: &GainsArgs) -> AppResult<LqrWeights> {
    let mut w = LqrWeights::hover_default();
    if let Some(q) = &a.q {
        let q: [f64; STATE_DIM] =
            q.as_slice().try_into().map_err(|_| AppError::Input(format!("--q takes 10 values, got {}", q.len())))?;
        w.q = LqrWeights::diagonal(&q, &[1.0; 3]).q;
    }
    if let Some(r) = &a.r {
        let r: [f64; 3] =
            r.as_slice().try_into().map_err(|_| AppError::Input(format!("--r takes 3 values, got {}", r.len())))?;
        w.r = LqrWeights::diagonal(&[0.0; STATE_DIM], &r).r;
    }
    w.input_units = match a.input_units {
        UnitsArg::Volts => InputUnits::ActuatorVolts,
        UnitsArg::Wrench => InputUnits::Wrench,
    };
    w.validate().map_err(|e| AppError::Input(e.to_string()))?;
    Ok(w)
}

fn gains(ctx: &Ctx, a: &GainsArgs) -> AppResult<()> {
    let sol = lqr_gain(&ctx.params, &weights(a)?)?;
    let text = report::gains(&sol);
    let k = ctx.path("gain.csv");
    csvio::write_gain_csv(&k, &sol.k)?;
    wrote(&k);
    let p = ctx.path("riccati.csv");
    csvio::write_state_matrix_csv(&p, &sol.p)?;
    wrote(&p);
    wrote(&ctx.save_text("gains.txt", &text)?);
    ctx.say(&text);
    if !sol.is_hurwitz() {
        return Err(AppError::Numerical("closed loop is not Hurwitz".into()));
    }
    Ok(())
}

fn default_gain(p: &VehicleParams) -> AppResult<GainMatrix> {
    Ok(lqr_gain(p, &LqrWeights::hover_default())?.k)
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> AppResult<()> {
    let mut sc = load_scenario(&a.scenario, &ctx.params)?;
    if let Some(seed) = ctx.seed {
        sc.seed = seed;
    }
    if let Some(n) = a.noise {
        sc.noise.enabled = n == Toggle::On;
    }
    if let Some(dt) = a.dt {
        sc.dt = dt;
    }
    sc.validate().map_err(|e| AppError::Input(format!("scenario '{}': {e}", sc.name)))?;
    let k = match &a.gain {
        Some(path) => csvio::read_gain_csv(path)?,
        None => default_gain(&ctx.params)?,
    };
    let (log, abort) = match run_scenario(&sc, &ctx.params, &k) {
        Ok(log) => (log, None),
        Err(ab) => {
            let msg = format!("run aborted at t = {:.4} s: {}", ab.time, ab.diagnostic);
            (ab.log, Some(msg))
        }
    };
    let run = ctx.path("run.csv");
    csvio::write_run_log_csv(&run, &log)?;
    wrote(&run);
    if let Some(msg) = abort {
        return Err(AppError::Numerical(format!("{msg}; partial log in {}", run.display())));
    }
    let mocap = ctx.path("mocap.csv");
    csvio::write_mocap_csv(&mocap, &MocapTrajectory::from_run_log(&log)?)?;
    wrote(&mocap);
    let cmds = ctx.path("commands.csv");
    csvio::write_commands_csv(&cmds, &flapper_core::pipeline::CommandTrack::from_run_log(&log)?)?;
    wrote(&cmds);
    let text = report::run(&sc, &log, &scenario_metrics(&sc, &log)?);
    wrote(&ctx.save_text("metrics.txt", &text)?);
    ctx.say(&text);
    Ok(())
}

fn filter_for(cutoff: f64) -> FilterConfig {
    if cutoff == 0.0 {
        FilterConfig::disabled()
    } else {
        FilterConfig::cutoff(cutoff)
    }
}

fn load_mocaps(paths: &[PathBuf], opts: MocapCsvOptions) -> AppResult<Vec<MocapTrajectory>> {
    paths.iter().map(|p| csvio::read_mocap_csv(p, opts)).collect()
}

/// Reconstructs each flight separately, so the filter never straddles a seam,
/// then lays them end to end in time.
fn stacked_states(
    flights: &[MocapTrajectory],
    commands: Option<&[flapper_core::pipeline::CommandTrack]>,
    cfg: &FilterConfig,
    names: &[PathBuf],
) -> AppResult<ReconstructedStates> {
    let mut parts = Vec::with_capacity(flights.len());
    let mut offset = 0.0;
    for (i, tr) in flights.iter().enumerate() {
        let at = |e: flapper_core::Error| AppError::format(&names[i], e.to_string());
        let mut rs = reconstruct(tr, cfg).map_err(at)?;
        if let Some(c) = commands {
            rs.attach_commands(&c[i]).map_err(at)?;
        }
        let (t0, t1) = tr.span();
        let shift = if i == 0 { 0.0 } else { offset - t0 };
        rs.t.iter_mut().for_each(|t| *t += shift);
        offset = t1 + shift + 1.0 / tr.sample_rate;
        parts.push(rs);
    }
    Ok(ReconstructedStates::concat(&parts))
}

fn pair(v: &[f64], flag: &str) -> AppResult<(f64, f64)> {
    match v {
        &[a, b] if a < b => Ok((a, b)),
        _ => Err(AppError::Input(format!("{flag} takes T0,T1 with T0 < T1"))),
    }
}

fn validate(ctx: &Ctx, a: &ValidateArgs) -> AppResult<()> {
    if a.data.len() != a.commands.len() {
        return Err(AppError::Input(format!("{} data files but {} command files", a.data.len(), a.commands.len())));
    }
    if a.cutoff.is_empty() {
        return Err(AppError::Input("--cutoff needs at least one value".into()));
    }
    let flights = load_mocaps(&a.data, a.mocap.options())?;
    let commands = a.commands.iter().map(|p| csvio::read_commands_csv(p)).collect::<AppResult<Vec<_>>>()?;
    let mut text = String::new();
    let mut first = None;
    for &fc in &a.cutoff {
        let mut rs = stacked_states(&flights, Some(&commands), &filter_for(fc), &a.data)?;
        if let Some(w) = &a.window {
            let (t0, t1) = pair(w, "--window")?;
            rs = rs.restrict(t0, t1)?;
        }
        let r = validate_model(&rs, &ctx.params)?;
        let label = if fc == 0.0 { "unfiltered".to_string() } else { format!("cutoff {fc} Hz") };
        text.push_str(&report::validation(&label, &r));
        first.get_or_insert(r);
    }
    if let Some(w) = &a.offset_window {
        let (t0, t1) = pair(w, "--offset-window")?;
        let o = estimate_body_offset(&flights[0], (t0, t1), ctx.params.gravity)?;
        text.push_str(&report::body_offset(&o));
    }
    // nothing is written until every result is in hand
    if let Some(r) = &first {
        let p = ctx.path("validation.csv");
        csvio::write_validation_csv(&p, r)?;
        wrote(&p);
    }
    wrote(&ctx.save_text("validation.txt", &text)?);
    ctx.say(&text);
    Ok(())
}

fn envelope(ctx: &Ctx, a: &EnvelopeArgs) -> AppResult<()> {
    let mut cfg = EnvelopeConfig::default();
    if let Some(e) = &a.tilt_edges {
        cfg.tilt_edges_deg = e.clone();
    }
    if let Some(e) = &a.speed_edges {
        cfg.speed_edges = e.clone();
    }
    cfg.speed = match a.speed {
        SpeedArg::Horizontal => SpeedMeasure::Horizontal,
        SpeedArg::Total => SpeedMeasure::Total,
    };
    cfg.validate().map_err(|e| AppError::Input(e.to_string()))?;
    let flights = load_mocaps(&a.data, a.mocap.options())?;
    let mut hist: Option<Histogram> = None;
    for (tr, path) in flights.iter().zip(&a.data) {
        let rs = stacked_states(std::slice::from_ref(tr), None, &filter_for(a.cutoff), std::slice::from_ref(path))?;
        let h = flight_envelope(&rs, &cfg)?;
        match &mut hist {
            None => hist = Some(h),
            Some(acc) => acc.merge(&h)?,
        }
    }
    let hist = hist.ok_or_else(|| AppError::Input("no input files".into()))?;
    let p = ctx.path("envelope.csv");
    csvio::write_envelope_csv(&p, &hist)?;
    wrote(&p);
    let text = report::envelope(&hist);
    ctx.say(&text);
    Ok(())
}
