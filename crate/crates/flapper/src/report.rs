//! Plain-text summaries printed by the CLI and saved next to its outputs.

use std::fmt::Write;

use flapper_core::lqr::{GainMatrix, LqrSolution, STATE_NAMES};
use flapper_core::pipeline::{BodyOffset, Histogram, ValidationReport, AXIS_NAMES};
use flapper_core::sim::{RunLog, RunMetrics, Scenario, RNG_NAME};

use crate::csvio::INPUT_NAMES;

fn gain_table(out: &mut String, k: &GainMatrix) {
    let _ = write!(out, "{:>8}", "");
    for n in STATE_NAMES {
        let _ = write!(out, " {n:>11}");
    }
    out.push('\n');
    for (i, name) in INPUT_NAMES.iter().enumerate() {
        let _ = write!(out, "{name:>8}");
        for j in 0..STATE_NAMES.len() {
            let _ = write!(out, " {:>11.4e}", k[(i, j)]);
        }
        out.push('\n');
    }
}

pub fn gains(sol: &LqrSolution) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "LQR gain on the wrench inputs (dwrench = K (sigma_des - sigma)):");
    gain_table(&mut s, &sol.k);
    let _ = writeln!(s, "\nSame gain in actuator volts:");
    gain_table(&mut s, &sol.gain_volts());
    let _ = writeln!(s, "\nclosed-loop eigenvalues:");
    let mut eigs = sol.closed_loop_eigs.clone();
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    for e in &eigs {
        let _ = writeln!(s, "  {:>14.6e} {:+.6e}i", e.re, e.im);
    }
    let _ = writeln!(s, "relative CARE residual: {:.3e}", sol.care_residual);
    let _ = writeln!(s, "residual relative to ||Q||: {:.3e}", sol.care_residual_q);
    let _ = writeln!(s, "Hurwitz: {}", if sol.is_hurwitz() { "yes" } else { "no" });
    s
}

fn opt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "not settled".to_string(), |t| format!("{t:.4} s"))
}

pub fn run(sc: &Scenario, log: &RunLog, m: &RunMetrics) -> String {
    let mut s = String::new();
    let (t0, t1) = sc.metrics_window.unwrap_or((0.0, sc.duration));
    let _ = writeln!(s, "scenario: {}", sc.name);
    let _ = writeln!(s, "seed: {} ({RNG_NAME}), noise: {}", log.seed, if sc.noise.enabled { "on" } else { "off" });
    let _ = writeln!(
        s,
        "control rate: {} Hz, physics dt: {:.6e} s, ticks logged: {}",
        sc.control_rate,
        sc.dt,
        log.rows.len()
    );
    let _ = writeln!(s, "metrics window: [{t0:.4}, {t1:.4}] s ({} samples)", m.samples);
    let _ = writeln!(s, "  rms position error (3D): {:.6e} m", m.rms_pos_3d);
    let _ = writeln!(s, "  rms position error (xy): {:.6e} m", m.rms_pos_xy);
    let _ = writeln!(s, "  max position error:      {:.6e} m", m.max_pos_err);
    let _ = writeln!(s, "  final position error:    {:.6e} m", m.final_pos_err);
    let _ = writeln!(s, "  settling time (< {:.1e} m): {}", sc.settle_tol, opt_time(m.settling_time));
    let _ = writeln!(s, "  max |roll|, |pitch|:     {:.4} deg", m.max_attitude.to_degrees());
    let _ = writeln!(s, "  max body speed:          {:.6e} m/s", m.max_body_speed);
    let _ = writeln!(s, "  saturation duty:         {:.2} %", 100.0 * m.saturation_duty);
    s
}

/// One block per cutoff in a sweep.
pub fn validation(label: &str, r: &ValidationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{label} ({} samples)", r.t.len());
    let _ = writeln!(
        s,
        "  {:>6} {:>13} {:>13} {:>13} {:>10}",
        "axis", "rms error", "rms measured", "rms predicted", "relative"
    );
    for (name, a) in AXIS_NAMES.iter().zip(&r.axes) {
        let _ = writeln!(
            s,
            "  {name:>6} {:>13.4e} {:>13.4e} {:>13.4e} {:>9.3}%",
            a.rms_error,
            a.rms_measured,
            a.rms_predicted,
            100.0 * a.relative()
        );
    }
    s
}

pub fn envelope(h: &Histogram) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "flight envelope: {} samples, {} occupied bins", h.total, h.nonzero_bins().len());
    let _ = write!(s, "{:>12}", "tilt \\ speed");
    for j in 0..h.speed_edges.len() - 1 {
        let _ = write!(s, " {:>6.2}", h.speed_edges[j]);
    }
    s.push('\n');
    for i in 0..h.tilt_edges_deg.len() - 1 {
        let _ = write!(s, "{:>5.1}-{:<5.1}deg", h.tilt_edges_deg[i], h.tilt_edges_deg[i + 1]);
        for j in 0..h.speed_edges.len() - 1 {
            let _ = write!(s, " {:>6}", h.counts[i][j]);
        }
        s.push('\n');
    }
    s
}

pub fn body_offset(o: &BodyOffset) -> String {
    let d = o.thrust_dir_b;
    format!(
        "thrust direction in marker body frame: [{:.6}, {:.6}, {:.6}]\ntilt from marker z axis: {:.4} deg\n",
        d.x,
        d.y,
        d.z,
        o.tilt.to_degrees()
    )
}
