use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flapper::{EXIT_INPUT, EXIT_NUMERICAL};

fn flapper(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flapper"))
        .arg("--quiet")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_gains_report_a_tiny_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_flapper")).arg("--out").arg(dir.path()).arg("gains").output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("relative CARE residual")).unwrap();
    let res: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(res <= 1e-8, "{line}");
    assert!(text.contains("Hurwitz: yes"));
    for f in ["gain.csv", "riccati.csv", "gains.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn zero_input_weight_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = flapper(dir.path(), &["gains", "--r", "2,0,1"]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
    assert!(stderr(&o).contains("positive definite"), "{}", stderr(&o));
    assert!(!dir.path().join("gain.csv").exists());
}

#[test]
fn jointly_scaled_weights_give_identical_gain_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(flapper(a.path(), &["gains"]).status.success());
    let o = flapper(b.path(), &["gains", "--q", "0.2,0.2,0.1,1,1,1,10,10,40,40", "--r", "20,10,10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.path().join("gain.csv")).unwrap(), fs::read(b.path().join("gain.csv")).unwrap());
}

#[test]
fn wrong_weight_count_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = flapper(dir.path(), &["gains", "--q", "1,2,3"]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
}

fn metric(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.trim_start().starts_with(key)).unwrap_or_else(|| panic!("{key} missing"));
    line.split_whitespace().rev().nth(1).unwrap().parse().unwrap()
}

#[test]
fn bundled_scenarios_run_and_report() {
    for (name, duration, rows) in [("hover", 2.0, 481), ("circle", 4.5, 1081), ("disturbance", 3.0, 721)] {
        let dir = tempfile::tempdir().unwrap();
        let o = flapper(dir.path(), &["simulate", name]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let run = fs::read_to_string(dir.path().join("run.csv")).unwrap();
        assert_eq!(run.lines().count(), rows + 1, "{name}");
        let last_t: f64 = run.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
        assert!((last_t - duration).abs() < 1e-9);
        let m = fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
        for key in ["rms position error (3D)", "rms position error (xy)", "settling time", "saturation duty"] {
            assert!(m.contains(key), "{name}: {key}");
        }
        assert!(metric(&m, "rms position error (3D)").is_finite());
        assert!(dir.path().join("mocap.csv").exists() && dir.path().join("commands.csv").exists());
    }
}

#[test]
fn circle_scenario_tracks_the_documented_circle() {
    let dir = tempfile::tempdir().unwrap();
    assert!(flapper(dir.path(), &["simulate", "circle"]).status.success());
    let run = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let header: Vec<&str> = run.lines().next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let (ix, iy) = (col("sp_x"), col("sp_y"));
    for line in run.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[ix].hypot(v[iy]) - 0.1).abs() < 1e-12);
    }
}

#[test]
fn seed_override_changes_noisy_runs_only() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = flapper(dir.path(), &["--seed", seed, "simulate", "hover", "--noise", "on"]);
        assert!(o.status.success());
        fs::read(dir.path().join("run.csv")).unwrap()
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn blow_up_exits_numerically_with_a_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let gain = dir.path().join("bad_gain.csv");
    // destabilizing: positive feedback on altitude
    let mut text = String::from("input,d_x,d_y,d_z,u,v,w,phi,theta,p,q\n");
    text.push_str("Gamma,0,0,-10,0,0,-10,0,0,0,0\ntau_r,0,0,0,0,0,0,0,0,0,0\ntau_p,0,0,0,0,0,0,0,0,0,0\n");
    fs::write(&gain, text).unwrap();
    let scen = dir.path().join("s.scenario");
    fs::write(
        &scen,
        "name = \"climb\"\nduration = 20.0\n[initial]\npos = [0.0, 0.0, 0.05]\n[setpoint]\nkind = \"constant\"\npos = [0.0, 0.0, 0.0]\n",
    )
    .unwrap();
    let o = flapper(dir.path(), &["simulate", scen.to_str().unwrap(), "--gain", gain.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL), "{}", stderr(&o));
    assert!(stderr(&o).contains("partial log"));
    let run = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(run.lines().count() > 2 && run.lines().count() < 4802);
}

#[test]
fn unknown_scenario_and_bad_scenario_fields_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(flapper(dir.path(), &["simulate", "loop-the-loop"]).status.code(), Some(EXIT_INPUT));
    let scen = dir.path().join("bad.scenario");
    fs::write(
        &scen,
        "name = \"x\"\nduration = 1.0\nwobble = 3\n[setpoint]\nkind = \"constant\"\npos = [0.0, 0.0, 0.0]\n",
    )
    .unwrap();
    let o = flapper(dir.path(), &["simulate", scen.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
    assert!(stderr(&o).contains("wobble"));
}

fn simulate_into(dir: &Path, name: &str) {
    let o = flapper(dir, &["simulate", name]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validating_a_simulator_export_gives_near_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "circle");
    let mocap = dir.path().join("mocap.csv");
    let cmds = dir.path().join("commands.csv");
    let out = dir.path().join("v");
    let o = flapper(
        &out,
        &[
            "validate",
            mocap.to_str().unwrap(),
            "--commands",
            cmds.to_str().unwrap(),
            "--cutoff",
            "20,0",
            "--window",
            "0.45,4.05",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("validation.txt")).unwrap();
    assert!(report.contains("cutoff 20 Hz") && report.contains("unfiltered"));
    let first_block: Vec<&str> = report.lines().skip(2).take(6).collect();
    for line in first_block {
        let rel: f64 = line.split_whitespace().last().unwrap().trim_end_matches('%').parse().unwrap();
        assert!(rel < 1.0, "{line}");
    }
    let series = fs::read_to_string(out.join("validation.csv")).unwrap();
    assert_eq!(series.lines().next().unwrap().split(',').count(), 13);
}

#[test]
fn truncated_mocap_file_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "hover");
    let mocap = dir.path().join("mocap.csv");
    let mut text = fs::read_to_string(&mocap).unwrap();
    // cut the file in the middle of a row
    text.truncate(text.len() - 40);
    let cut = dir.path().join("cut.csv");
    fs::write(&cut, text).unwrap();
    let cmds = dir.path().join("commands.csv");
    let o = flapper(dir.path(), &["validate", cut.to_str().unwrap(), "--commands", cmds.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
    let err = stderr(&o);
    assert!(err.contains("cut.csv") && err.contains("row 481"), "{err}");
}

#[test]
fn several_files_are_stacked_in_time() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path(), "hover");
    simulate_into(b.path(), "disturbance");
    let p = |d: &Path, f: &str| d.join(f).to_str().unwrap().to_string();
    let out = a.path().join("v");
    let o = flapper(
        &out,
        &[
            "validate",
            &p(a.path(), "mocap.csv"),
            &p(b.path(), "mocap.csv"),
            "--commands",
            &p(a.path(), "commands.csv"),
            &p(b.path(), "commands.csv"),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let series = fs::read_to_string(out.join("validation.csv")).unwrap();
    let t: Vec<f64> = series.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    // each flight loses two samples at either end to the differentiator
    assert_eq!(t.len(), (481 - 4) + (721 - 4));
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert!(*t.last().unwrap() > 4.9);
}

#[test]
fn mismatched_command_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "hover");
    let m = dir.path().join("mocap.csv");
    let c = dir.path().join("commands.csv");
    let o =
        flapper(dir.path(), &["validate", m.to_str().unwrap(), m.to_str().unwrap(), "--commands", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
}

#[test]
fn failed_offset_estimate_writes_no_validation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "hover");
    let m = dir.path().join("mocap.csv");
    let c = dir.path().join("commands.csv");
    let out = dir.path().join("v");
    let o =
        flapper(&out, &["validate", m.to_str().unwrap(), "--commands", c.to_str().unwrap(), "--offset-window", "0,1"]);
    // hovering has no net acceleration to estimate a thrust axis from
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("0.2 g"), "{}", stderr(&o));
    assert!(!out.join("validation.csv").exists());
    assert!(!out.join("validation.txt").exists());
}

fn envelope_counts(csv: &str) -> Vec<(f64, f64, u64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[2].parse().unwrap(), v[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn envelope_of_hover_has_one_dominant_bin_and_default_edges() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "hover");
    let m = dir.path().join("mocap.csv");
    let out = dir.path().join("e");
    assert!(flapper(&out, &["envelope", m.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("envelope.csv")).unwrap();
    let bins = envelope_counts(&csv);
    let total: u64 = bins.iter().map(|b| b.2).sum();
    let max = bins.iter().map(|b| b.2).max().unwrap();
    assert_eq!(total, 481 - 4);
    assert_eq!(max, total);
    assert!(bins.iter().any(|b| b.0 == 30.0));
    assert!(bins.iter().any(|b| (b.1 - 0.4).abs() < 1e-12));
}

#[test]
fn envelope_mass_equals_the_samples_of_all_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path(), "hover");
    simulate_into(b.path(), "circle");
    let out = a.path().join("e");
    let o = flapper(
        &out,
        &[
            "envelope",
            a.path().join("mocap.csv").to_str().unwrap(),
            b.path().join("mocap.csv").to_str().unwrap(),
            "--speed",
            "total",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let total: u64 = envelope_counts(&fs::read_to_string(out.join("envelope.csv")).unwrap()).iter().map(|b| b.2).sum();
    assert_eq!(total, (481 - 4) + (1081 - 4));
}

#[test]
fn envelope_without_files_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = flapper(dir.path(), &["envelope"]);
    assert!(!o.status.success());
}

#[test]
fn parameter_file_overrides_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.toml");
    fs::write(&params, "J = [3.12e-9, 2.97e-9, 0.55e-9]\n").unwrap();
    let o = flapper(dir.path(), &["--params", params.to_str().unwrap(), "gains"]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::write(&params, "mass = 1.0\n").unwrap();
    let o = flapper(dir.path(), &["--params", params.to_str().unwrap(), "gains"]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
}
