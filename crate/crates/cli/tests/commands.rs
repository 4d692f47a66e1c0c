use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lbes_cli::app::execute;
use lbes_cli::csvio::read_trajectory;
use lbes_cli::presets;
use tempfile::TempDir;

fn lbes(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbes"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("lbes runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_csv_starting_at_the_initial_state() {
    let dir = TempDir::new().unwrap();
    let o = lbes(&["run", "--preset", "fig2b", "--out", "b.csv", "--plot", "b.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_trajectory(fs::File::open(dir.path().join("b.csv")).unwrap()).unwrap();
    assert_eq!(rows[0].t, 0.0);
    assert_eq!(rows[0].x, vec![-1.0]);
    assert_eq!(rows.last().unwrap().t, 100.0);
    let svg = fs::read_to_string(dir.path().join("b.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.contains("fig2b"));
}

#[test]
fn csv_round_trip_is_exact() {
    let spec = presets::load("fig4b").unwrap();
    let traj = execute(&spec).unwrap().traj;
    let bytes = lbes_cli::csvio::trajectory_bytes(&traj).unwrap();
    let rows = read_trajectory(bytes.as_slice()).unwrap();
    assert_eq!(rows.len(), traj.len());
    for (row, s) in rows.iter().zip(traj.samples()) {
        assert_eq!(row.t.to_bits(), s.t.to_bits());
        assert_eq!(row.x, s.x);
        assert_eq!(row.h_m.to_bits(), s.h_m.to_bits());
        assert_eq!(row.tau.to_bits(), s.tau.to_bits());
        assert_eq!(row.alpha.to_bits(), s.alpha.to_bits());
        assert_eq!(row.phase, s.phase);
        assert_eq!(row.g, s.g);
    }
}

#[test]
fn divergent_run_exits_2_with_partial_csv() {
    let dir = TempDir::new().unwrap();
    let o = lbes(&["run", "--preset", "fig2c", "--out", "c.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let rows = read_trajectory(fs::File::open(dir.path().join("c.csv")).unwrap()).unwrap();
    let last = rows.last().unwrap();
    assert!(last.t < 4.0);
    assert!(last.x[0] < -10.0);
}

#[test]
fn width_above_period_exits_1() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "[measurement]\nTs = 1.0\neps = 1.2\n").unwrap();
    let o = lbes(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("0 < eps <= Ts"), "{}", stderr(&o));
}

#[test]
fn unparseable_config_reports_the_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "name = \"x\"\n[scheme]\nomega = = 3\n").unwrap();
    let o = lbes(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    assert_eq!(lbes(&["verify", "--suite", "everything"], dir.path()).status.code(), Some(1));
    assert_eq!(lbes(&["run"], dir.path()).status.code(), Some(1));
    assert_eq!(lbes(&["run", "--preset", "fig9"], dir.path()).status.code(), Some(1));
    assert_eq!(lbes(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(lbes(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn sweep_rows_follow_the_grid() {
    let dir = TempDir::new().unwrap();
    let base = "x0 = [-1.0]\n[scheme]\nkind = \"classical-intermittent\"\n[engine]\nt_end = 4.0\nblowup = 10.0\n";
    fs::write(dir.path().join("base.toml"), base).unwrap();
    let o = lbes(
        &[
            "sweep",
            "--config",
            "base.toml",
            "--grid",
            "scheme.omega=62.83,125.66",
            "measurement.eps=0.1,0.17",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("scheme.omega,measurement.eps,steady_state_error"));
    assert!(lines[1].starts_with("62.83,0.1,"));
    assert!(lines[2].starts_with("62.83,0.17,"));
    assert!(lines[4].starts_with("125.66,0.17,"));
    // ε = 0.17 at ω = 20π is the divergent cell; the sweep carries on
    assert!(lines[2].contains(",true,"), "{}", lines[2]);
    assert!(lines[1].contains(",false,"), "{}", lines[1]);

    let single = lbes(&["sweep", "--config", "base.toml", "--out", "one.csv"], dir.path());
    assert_eq!(single.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("one.csv")).unwrap().lines().count(), 2);

    let serial = Command::new(env!("CARGO_BIN_EXE_lbes"))
        .args(["sweep", "--config", "base.toml", "--grid", "scheme.omega=62.83,125.66", "measurement.eps=0.1,0.17"])
        .args(["--out", "serial.csv"])
        .env("ES_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("serial.csv")).unwrap(), text.as_bytes());
}

#[test]
fn sweep_rejects_unknown_keys_before_running() {
    let dir = TempDir::new().unwrap();
    let o = lbes(&["sweep", "--preset", "fig2b", "--grid", "scheme.omgea=1,2", "--out", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("omgea"));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn verify_gamma_passes() {
    let dir = TempDir::new().unwrap();
    let o = lbes(&["verify", "--suite", "gamma"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("γ12 = 1/2 for cos/sin") && out.contains("PASS"), "{out}");
    assert!(out.contains("0 failed"));
}

#[test]
fn verify_all_passes() {
    let dir = TempDir::new().unwrap();
    let o = lbes(&["verify", "--suite", "all"], dir.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{out}");
    for suite in ["dithers", "gamma", "assumption4", "path-equivalence", "gradient-scaling", "reference-oracle"] {
        assert!(out.contains(suite), "{suite} missing from\n{out}");
    }
}

#[test]
fn presets_are_listed() {
    let dir = TempDir::new().unwrap();
    let o = lbes(&["presets"], dir.path());
    let out = String::from_utf8_lossy(&o.stdout);
    let names: Vec<&str> = out.lines().collect();
    assert_eq!(names, ["fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b"]);
}
