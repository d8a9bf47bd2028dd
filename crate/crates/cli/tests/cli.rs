use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use kresling_core::cloud::read_cloud_csv;
use kresling_core::optimize::read_cost_table;
use kresling_core::simulate::{read_trajectory_csv, TrajectoryJson};
use kresling_core::{ConfigurationCloud, Plan, SearchReport};

fn kresling(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kresling"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> Output {
    let o = kresling(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    o
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn enumerate_one_unit_lists_every_design() {
    let csv = ok(&["enumerate", "-n", "1"]);
    let rows = read_cloud_csv(csv.stdout.as_slice()).unwrap();
    let designs: BTreeSet<_> = rows.iter().map(|r| r.design_string.as_str()).collect();
    assert_eq!(designs.len(), 38);
    // Two Kresling designs with one node each, 36 bistable ones with 6 nodes each.
    assert_eq!(rows.len(), 2 * 3 + 36 * 6);
    assert!(stderr(&csv).contains("38 designs"));

    let json = ok(&["enumerate", "-n", "1", "--format", "json"]);
    let clouds: Vec<ConfigurationCloud> = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(clouds.len(), 38);
    assert_eq!(clouds[0].design, rows[0].design_string);
}

#[test]
fn enumerate_cost_table_reloads() {
    let o = ok(&["enumerate", "-n", "1", "--cost", "max_bend"]);
    let rows = read_cost_table(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 38);
    assert!(rows.windows(2).all(|w| w[0].design < w[1].design));
}

#[test]
fn enumerate_guard_is_a_usage_error() {
    let o = kresling(&["enumerate", "-n", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("guard"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn invalid_search_parameters_are_usage_errors() {
    for args in [
        &["optimize", "--method", "annealing", "--cost", "max_bend"][..],
        &["optimize", "--cost", "max_bend", "--n-u", "0"],
        &["optimize", "--cost", "max_bend", "--n-u", "3", "--n-s-max", "6"],
        &["optimize", "--method", "exhaustive", "--cost", "max_bend"],
        &["optimize", "--method", "exhaustive", "--cost", "max_bend", "-n", "5"],
        &["optimize", "--method", "random", "--cost", "max_bend", "-n", "2", "--budget", "0"],
        &["optimize"],
    ] {
        let o = kresling(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn exhaustive_three_units_logs_every_evaluation() {
    let o = ok(&["optimize", "--method", "exhaustive", "-n", "3", "--cost", "max_deployment"]);
    assert!(stderr(&o).contains("54872 evaluations"), "{}", stderr(&o));
    let report = SearchReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.total_evaluations, 54_872);
    assert_eq!(report.best.n_units, 3);
}

#[test]
fn trivially_placed_target_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("targets.toml");
    std::fs::write(&targets, "targets = [[0.0, 0.0, 24.0]]\n").unwrap();
    let o = ok(&[
        "optimize",
        "--targets",
        targets.to_str().unwrap(),
        "--method",
        "exhaustive",
        "-n",
        "1",
    ]);
    let report = SearchReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.best.psi, 0.0);
    assert!(stderr(&o).contains("psi = 0.000000"));

    let json = dir.path().join("targets.json");
    std::fs::write(&json, "[[0.0, 0.0, 24.0]]").unwrap();
    let csv = ok(&["optimize", "--targets", json.to_str().unwrap(), "--n-u", "1", "--n-s-max", "2", "--format", "csv"]);
    let curve = SearchReport::read_curve_csv(csv.stdout.as_slice()).unwrap();
    assert_eq!(curve.len(), 2);
    assert_eq!(curve[0].psi, 0.0);
}

#[test]
fn empty_history_is_one_rest_row() {
    let o = ok(&["simulate", "--design", "[4\\\\2;3//6;4\\\\2]"]);
    let rows = read_trajectory_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].state_bits, "00");
    assert_eq!(rows[0].pressure_kpa, 0.0);
    assert!((rows[0].d_z_mm - 72.0).abs() < 1e-9);
}

#[test]
fn pressure_loop_closes_and_exports() {
    let design = "[4\\\\2;3//6;4\\\\2]";
    let csv = ok(&["simulate", "--design", design, "--events", "36,-21.2,-30,0"]);
    let rows = read_trajectory_csv(csv.stdout.as_slice()).unwrap();
    let (first, last) = (&rows[0], rows.last().unwrap());
    let gap = ((first.d_x_mm - last.d_x_mm).powi(2)
        + (first.d_y_mm - last.d_y_mm).powi(2)
        + (first.d_z_mm - last.d_z_mm).powi(2))
    .sqrt();
    assert!(gap < 1e-6, "loop gap {gap}");
    assert!(rows.iter().any(|r| r.state_bits == "11"));

    let json = ok(&["simulate", "--design", design, "--events", "36,-21.2,-30,0", "--format", "json"]);
    let t: TrajectoryJson = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(t.samples.len(), rows.len());
    assert_eq!(t.depths_mm, vec![3, 4]);
    assert!(t.samples.iter().all(|s| s.caps.len() == 3));
}

#[test]
fn planned_paths_pipe_into_simulate() {
    let design = "[2//3;4//6]";
    for (goal, state) in [("s01", "01"), ("s11@p2-", "11"), ("s01@p4-", "01"), ("s00@max-", "00")] {
        let plan = ok(&["plan", "--design", design, "--goal", goal, "--format", "json"]);
        let parsed: Plan = serde_json::from_slice(&plan.stdout).unwrap();
        assert_eq!(parsed.final_state, state);
        let pressure = parsed.final_pressure_kpa;

        let mut child = Command::new(env!("CARGO_BIN_EXE_kresling"))
            .args(["simulate", "--design", design, "--events-file", "-"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(&plan.stdout).unwrap();
        let replay = child.wait_with_output().unwrap();
        assert!(replay.status.success(), "{}", stderr(&replay));
        let rows = read_trajectory_csv(replay.stdout.as_slice()).unwrap();
        let last = rows.last().unwrap();
        assert_eq!((last.state_bits.as_str(), last.pressure_kpa), (state, pressure), "{goal}");
    }
}

#[test]
fn plan_text_lists_the_events() {
    let o = ok(&["plan", "--design", "[2//3;4//6]", "--goal", "s01"]);
    assert_eq!(
        stdout(&o),
        "1. raise pressure to 35.3 kPa\n2. lower pressure to -16.5 kPa\n3. raise pressure to 0 kPa\nfinal: s01 at 0 kPa (total swing 103.6 kPa)\n"
    );
}

#[test]
fn plan_failures() {
    let unreachable = kresling(&["plan", "--design", "[3//1]", "--tip", "0,0,500", "--tolerance", "1"]);
    assert_eq!(unreachable.status.code(), Some(1), "{}", stderr(&unreachable));
    let unknown = kresling(&["plan", "--design", "[3//1]", "--goal", "s11"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("s0@0"), "{}", stderr(&unknown));
}

#[test]
fn bad_design_points_at_the_token() {
    let o = kresling(&["simulate", "--design", "[3//1;5//2]"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("found 5"), "{err}");
    assert!(err.contains("  [3//1;5//2]\n        ^"), "{err}");
}

#[test]
fn out_of_range_events_follow_the_extrapolation_flag() {
    let strict = kresling(&["simulate", "--design", "[3//1]", "--events", "60"]);
    assert_eq!(strict.status.code(), Some(2));
    let clamped = ok(&["--clamp", "simulate", "--design", "[3//1]", "--events", "60"]);
    let rows = read_trajectory_csv(clamped.stdout.as_slice()).unwrap();
    assert_eq!(rows.last().unwrap().pressure_kpa, 45.0);
}

#[test]
fn io_failures_exit_with_one() {
    let missing = kresling(&["--calibration", "/nonexistent/cal.toml", "simulate", "--design", "[3//1]"]);
    assert_eq!(missing.status.code(), Some(1), "{}", stderr(&missing));
    let unwritable = kresling(&["simulate", "--design", "[3//1]", "--output", "/nonexistent/dir/out.csv"]);
    assert_eq!(unwritable.status.code(), Some(1));
}

#[test]
fn calibration_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cal.toml");
    let text = kresling_core::calibration::DEFAULT_CALIBRATION_TOML.replace("h_mm = 24.0", "h_mm = 30.0");
    assert_ne!(text, kresling_core::calibration::DEFAULT_CALIBRATION_TOML);
    std::fs::write(&path, text).unwrap();
    let o = ok(&["--calibration", path.to_str().unwrap(), "simulate", "--design", "[3//1]"]);
    let rows = read_trajectory_csv(o.stdout.as_slice()).unwrap();
    assert!((rows[0].d_z_mm - 30.0).abs() < 1e-9);

    std::fs::write(&path, "h_mm = \"tall\"\n").unwrap();
    let bad = kresling(&["--calibration", path.to_str().unwrap(), "simulate", "--design", "[3//1]"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let o = ok(&["plan", "--design", "[3//1]", "--goal", "s1", "--format", "json", "-o", path.to_str().unwrap()]);
    assert!(o.stdout.is_empty());
    let plan: Plan = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(plan.final_state, "1");
}

#[test]
fn random_search_is_reproducible() {
    let args = ["--seed", "42", "--jobs", "2", "optimize", "--method", "random", "-n", "3", "--budget", "500", "--cost", "max_bend"];
    let a = SearchReport::from_json(&stdout(&ok(&args))).unwrap();
    let b = SearchReport::from_json(&stdout(&ok(&args))).unwrap();
    assert_eq!(a.untimed(), b.untimed());
    assert_eq!(a.seed, Some(42));
    assert_eq!(a.total_evaluations, 500);
}

#[test]
fn shipped_scenarios_match_their_snapshots() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = kresling(&["run", path.to_str().unwrap(), "--check"]);
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            count += 1;
        }
    }
    assert_eq!(count, 5);
}

#[test]
fn scenario_snapshot_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("pop.toml");
    std::fs::write(
        &scenario,
        "name = \"pop\"\ncommand = \"plan\"\ndesign = \"[3//1]\"\ngoal = \"s1\"\nexpected = \"pop.json\"\n",
    )
    .unwrap();
    let s = scenario.to_str().unwrap();
    ok(&["run", s, "--bless"]);
    ok(&["run", s, "--check"]);
    let snapshot = dir.path().join("pop.json");
    let text = std::fs::read_to_string(&snapshot).unwrap().replace("26.6", "26.7");
    std::fs::write(&snapshot, text).unwrap();
    let o = kresling(&["run", s, "--check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("$.events[0].target_kpa"), "{}", stderr(&o));
}

#[test]
fn malformed_scenarios_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    for text in [
        "name = \"x\"\ncommand = \"simulate\"\ndesign = \"[3//1]\"\nmethod = \"greedy\"\n",
        "name = \"x\"\ncommand = \"dance\"\n",
        "name = \"x\"\ncommand = \"optimize\"\nmethod = \"greedy\"\ntargets = []\n",
    ] {
        std::fs::write(&path, text).unwrap();
        let o = kresling(&["run", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
    }
}
