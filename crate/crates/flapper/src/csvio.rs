//! CSV readers and writers. All writers go through [`atomic_write`], and all
//! floats are written with `{:e}`, the shortest representation that parses
//! back to the same value.

use std::fs;
use std::io::Write;
use std::path::Path;

use flapper_core::control::Setpoint;
use flapper_core::lqr::{GainMatrix, StateMatrix, STATE_NAMES};
use flapper_core::pipeline::{CommandTrack, Histogram, MocapTrajectory, ValidationReport, AXIS_NAMES};
use flapper_core::sim::RunLog;
use flapper_core::vehicle::ActuatorCmd;
use flapper_core::Vector3;

use crate::error::{AppError, AppResult};

pub const MOCAP_HEADER: [&str; 8] = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"];
pub const MOCAP_HEADER_SCALAR_LAST: [&str; 8] = ["t", "x", "y", "z", "qx", "qy", "qz", "qw"];
pub const COMMAND_HEADER: [&str; 4] = ["t", "A", "dA", "Vo"];
pub const SETPOINT_HEADER: [&str; 7] = ["t", "x", "y", "z", "vx", "vy", "vz"];
pub const INPUT_NAMES: [&str; 3] = ["Gamma", "tau_r", "tau_p"];

/// Column order of the run-log export.
pub fn run_log_header() -> Vec<String> {
    let mut h: Vec<String> = ["t", "X", "Y", "Z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(STATE_NAMES.iter().map(|s| format!("sigma_{s}")));
    h.extend(
        ["sp_x", "sp_y", "sp_z", "sp_vx", "sp_vy", "sp_vz", "A", "dA", "Vo", "Gamma", "tau_r", "tau_p", "sat"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// Writes to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| AppError::Input(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(AppError::io(path, e));
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn to_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| AppError::Input(format!("csv encoding: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| AppError::Input(format!("csv encoding: {e}")))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> AppResult<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    atomic_write(path, &to_bytes(&header, rows)?)
}

/// Reads a headed numeric table, checking the header and each row's column
/// count. Row numbers in errors count data rows from 1.
fn read_table(path: &Path, expected: &[&str]) -> AppResult<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_table(&text, path, expected)
}

fn parse_table(text: &str, path: &Path, expected: &[&str]) -> AppResult<Vec<Vec<f64>>> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| AppError::format(path, format!("unreadable header: {e}")))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(AppError::format(path, format!("header {:?} does not match the schema {:?}", got, expected)));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| AppError::format(path, format!("row {row}: {e}")))?;
        if rec.len() != expected.len() {
            return Err(AppError::format(
                path,
                format!("row {row}: expected {} columns, found {}", expected.len(), rec.len()),
            ));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>().map_err(|_| {
                    AppError::format(path, format!("row {row}, column '{}': cannot parse '{s}'", expected[j]))
                })
            })
            .collect::<AppResult<Vec<f64>>>()?;
        out.push(vals);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MocapCsvOptions {
    /// Quaternion columns ordered `qx, qy, qz, qw`.
    pub scalar_last: bool,
    /// Quaternions rotate world vectors into the body frame (they are
    /// conjugated on load).
    pub world_to_body: bool,
}

pub fn read_mocap_csv(path: &Path, opts: MocapCsvOptions) -> AppResult<MocapTrajectory> {
    let header: &[&str] = if opts.scalar_last { &MOCAP_HEADER_SCALAR_LAST } else { &MOCAP_HEADER };
    let rows = read_table(path, header)?;
    let raw: Vec<(f64, [f64; 3], [f64; 4])> = rows
        .iter()
        .map(|r| {
            let mut q = if opts.scalar_last { [r[7], r[4], r[5], r[6]] } else { [r[4], r[5], r[6], r[7]] };
            if opts.world_to_body {
                q = [q[0], -q[1], -q[2], -q[3]];
            }
            (r[0], [r[1], r[2], r[3]], q)
        })
        .collect();
    let source = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    MocapTrajectory::from_rows(&raw, &source).map_err(|e| AppError::format(path, e.to_string()))
}

pub fn write_mocap_csv(path: &Path, tr: &MocapTrajectory) -> AppResult<()> {
    write_csv(
        path,
        &MOCAP_HEADER,
        tr.samples().iter().map(|s| {
            let q = s.quat.components();
            vec![fmt(s.t), fmt(s.pos.x), fmt(s.pos.y), fmt(s.pos.z), fmt(q[0]), fmt(q[1]), fmt(q[2]), fmt(q[3])]
        }),
    )
}

pub fn read_commands_csv(path: &Path) -> AppResult<CommandTrack> {
    let rows = read_table(path, &COMMAND_HEADER)?;
    let times = rows.iter().map(|r| r[0]).collect();
    let cmds = rows.iter().map(|r| ActuatorCmd::new(r[1], r[2], r[3])).collect();
    CommandTrack::new(times, cmds).map_err(|e| AppError::format(path, e.to_string()))
}

pub fn write_commands_csv(path: &Path, track: &CommandTrack) -> AppResult<()> {
    write_csv(
        path,
        &COMMAND_HEADER,
        track
            .times
            .iter()
            .zip(&track.cmds)
            .map(|(t, c)| vec![fmt(*t), fmt(c.amplitude), fmt(c.amplitude_diff), fmt(c.offset)]),
    )
}

pub fn read_setpoint_csv(path: &Path) -> AppResult<Vec<(f64, Setpoint)>> {
    let rows = read_table(path, &SETPOINT_HEADER)?;
    if rows.is_empty() {
        return Err(AppError::format(path, "setpoint table has no rows"));
    }
    rows.iter()
        .map(|r| {
            Setpoint::new(Vector3::new(r[1], r[2], r[3]), Vector3::new(r[4], r[5], r[6]))
                .map(|sp| (r[0], sp))
                .map_err(|e| AppError::format(path, e.to_string()))
        })
        .collect()
}

pub fn gain_csv_bytes(k: &GainMatrix) -> AppResult<Vec<u8>> {
    let mut header = vec!["input".to_string()];
    header.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    to_bytes(
        &header,
        (0..3).map(|i| {
            let mut row = vec![INPUT_NAMES[i].to_string()];
            row.extend((0..10).map(|j| fmt(k[(i, j)])));
            row
        }),
    )
}

pub fn write_gain_csv(path: &Path, k: &GainMatrix) -> AppResult<()> {
    atomic_write(path, &gain_csv_bytes(k)?)
}

pub fn read_gain_csv(path: &Path) -> AppResult<GainMatrix> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut k = GainMatrix::zeros();
    let mut seen = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AppError::format(path, format!("row {}: {e}", i + 1)))?;
        if i >= 3 || rec.len() != 11 || rec.get(0) != Some(INPUT_NAMES[i]) {
            return Err(AppError::format(
                path,
                format!("row {}: expected '{}' followed by 10 gains", i + 1, INPUT_NAMES[i.min(2)]),
            ));
        }
        for j in 0..10 {
            let s = &rec[j + 1];
            k[(i, j)] = s.parse().map_err(|_| AppError::format(path, format!("row {}: cannot parse '{s}'", i + 1)))?;
        }
        seen += 1;
    }
    if seen != 3 {
        return Err(AppError::format(path, format!("expected 3 gain rows, found {seen}")));
    }
    Ok(k)
}

/// Square state-space matrix with the state names as header and row labels.
pub fn write_state_matrix_csv(path: &Path, m: &StateMatrix) -> AppResult<()> {
    let mut header = vec!["state".to_string()];
    header.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    let rows = (0..STATE_NAMES.len()).map(|i| {
        let mut row = vec![STATE_NAMES[i].to_string()];
        row.extend((0..STATE_NAMES.len()).map(|j| fmt(m[(i, j)])));
        row
    });
    atomic_write(path, &to_bytes(&header, rows)?)
}

pub fn run_log_csv_bytes(log: &RunLog) -> AppResult<Vec<u8>> {
    to_bytes(
        &run_log_header(),
        log.rows.iter().map(|r| {
            let mut row = Vec::with_capacity(42);
            row.push(fmt(r.t));
            let a = r.truth.to_array();
            // pose (position, Euler angles), then body velocity and rates
            row.extend(
                [a[0], a[1], a[2], a[6], a[7], a[8], a[3], a[4], a[5], a[9], a[10], a[11]].iter().map(|x| fmt(*x)),
            );
            row.extend(r.ctrl.sigma().iter().map(|x| fmt(*x)));
            row.extend(r.setpoint.pos_w.iter().chain(r.setpoint.vel_w.iter()).map(|x| fmt(*x)));
            row.extend([r.cmd.amplitude, r.cmd.amplitude_diff, r.cmd.offset].iter().map(|x| fmt(*x)));
            row.extend(r.wrench.as_array().iter().map(|x| fmt(*x)));
            row.push(u8::from(r.saturated).to_string());
            row
        }),
    )
}

pub fn write_run_log_csv(path: &Path, log: &RunLog) -> AppResult<()> {
    atomic_write(path, &run_log_csv_bytes(log)?)
}

/// Long-format histogram: one row per bin.
pub fn write_envelope_csv(path: &Path, h: &Histogram) -> AppResult<()> {
    let mut rows = Vec::new();
    for i in 0..h.counts.len() {
        for j in 0..h.counts[i].len() {
            rows.push(vec![
                fmt(h.tilt_edges_deg[i]),
                fmt(h.tilt_edges_deg[i + 1]),
                fmt(h.speed_edges[j]),
                fmt(h.speed_edges[j + 1]),
                h.counts[i][j].to_string(),
                fmt(h.density(i, j)),
            ]);
        }
    }
    write_csv(path, &["tilt_lo_deg", "tilt_hi_deg", "speed_lo", "speed_hi", "count", "density"], rows)
}

/// Measured and predicted series side by side.
pub fn write_validation_csv(path: &Path, r: &ValidationReport) -> AppResult<()> {
    let mut header = vec!["t".to_string()];
    for a in AXIS_NAMES {
        header.push(format!("{a}_measured"));
        header.push(format!("{a}_predicted"));
    }
    let rows = (0..r.t.len()).map(|k| {
        let mut row = vec![fmt(r.t[k])];
        for i in 0..6 {
            row.push(fmt(r.measured[k][i]));
            row.push(fmt(r.predicted[k][i]));
        }
        row
    });
    atomic_write(path, &to_bytes(&header, rows)?)
}
