use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use region_solve::cli::scenario::load_scenario;
use region_solve::cli::{read_solution_csv, spec_for};
use region_solve::solver::{verify_solution, Operator};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_region-solve"));
    cmd.env_remove("REGION_SOLVE_SEED");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(cmd: &mut Command) -> (i32, Value, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary runs");
    let report = serde_json::from_slice(&stdout).unwrap_or(Value::Null);
    (
        status.code().unwrap_or(-1),
        report,
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

#[test]
fn reproduce_example_stays_below_two() {
    let (code, report, _) = run(bin().arg("reproduce-example"));
    assert_eq!(code, 0);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["passed"], true);
    assert!(report["max_space_time_norm"].as_f64().unwrap() <= 2.0);
    assert!(report["bc_residual"].as_f64().unwrap() <= 1e-4);
    assert_eq!(report["solve"]["operator"], "Kp");
    assert_eq!(report["solve"]["constants"]["c"], 3.0);
}

#[test]
fn outward_field_fails_h4_with_witness() {
    let (code, report, _) = run(bin().arg("check").arg(scenario("outward_field.json")));
    assert_eq!(code, 2);
    let h4 = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["hypothesis"] == "H4")
        .unwrap();
    assert_eq!(h4["verdict"], "fail");
    assert_eq!(h4["witness"].as_array().unwrap().len(), 3);
    assert!(h4["worst"].as_f64().unwrap() > 0.0);
}

#[test]
fn example_scenario_file_checks_out() {
    let s = load_scenario(&scenario("ball_integral.json")).unwrap();
    assert_eq!(s.dimension, 2);
    let (code, report, _) = run(bin().arg("check").arg(scenario("ball_integral.json")));
    assert_eq!(code, 0, "{report}");
}

#[test]
fn zero_field_gives_zero_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let (code, _, _) = run(bin()
        .arg("solve")
        .arg(scenario("zero_field_initial.json"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "x1", "x2", "h", "norm"]
    );
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        assert_eq!(record[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(record[2].parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 51);
}

#[test]
fn csv_round_trip_reproduces_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let path = scenario("damped_rotation.json");
    let (code, report, _) = run(bin().arg("solve").arg(&path).arg("--out").arg(&out));
    assert_eq!(code, 0, "{report}");
    let problem = load_scenario(&path).unwrap().build(true, None).unwrap();
    let spec = spec_for(&problem, problem.options.intervals).unwrap();
    let u = read_solution_csv(&out, *spec.grid()).unwrap();
    let v = verify_solution(&spec, &u, 1.0, Some(Operator::J)).unwrap();
    let reported = &report["solve"]["verification"];
    for (key, value) in [
        ("ode_residual", v.ode_residual),
        ("bc_residual", v.bc_residual),
        ("containment_max_distance", v.containment_max_distance),
        ("max_space_time_norm", v.max_space_time_norm),
    ] {
        assert!(
            (reported[key].as_f64().unwrap() - value).abs() <= 1e-12,
            "{key}"
        );
    }
}

#[test]
fn operator_and_grid_flags() {
    let path = scenario("ball_integral.json");
    let (code, report, _) =
        run(bin()
            .arg("solve")
            .arg(&path)
            .args(["--operator", "K", "--N", "100"]));
    assert!(code == 0 || code == 3 || code == 4, "{code}");
    assert_eq!(report["solve"]["operator"], "K");
    assert_eq!(report["solve"]["intervals"], 100);
    let (code, _, stderr) = run(bin().arg("solve").arg(&path).args(["--operator", "Q"]));
    assert_eq!(code, 1);
    assert!(stderr.contains("unknown operator"));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("ball_integral.json")).unwrap();
    let mut value: Value = serde_json::from_str(&text).unwrap();
    value.as_object_mut().unwrap().remove("region");
    let missing = dir.path().join("missing.json");
    std::fs::write(&missing, value.to_string()).unwrap();
    let (code, _, stderr) = run(bin().arg("check").arg(&missing));
    assert_eq!(code, 1);
    assert!(stderr.contains("region"), "{stderr}");

    let mut value: Value = serde_json::from_str(&text).unwrap();
    value["field"].as_array_mut().unwrap().push("0".into());
    let mismatch = dir.path().join("mismatch.json");
    std::fs::write(&mismatch, value.to_string()).unwrap();
    let (code, _, stderr) = run(bin().arg("solve").arg(&mismatch));
    assert_eq!(code, 1);
    assert!(stderr.contains("field"), "{stderr}");
}

#[test]
fn check_is_deterministic_and_seed_overridable() {
    let path = scenario("damped_rotation.json");
    let first = bin().arg("check").arg(&path).output().unwrap();
    let second = bin().arg("check").arg(&path).output().unwrap();
    assert_eq!(first.stdout, second.stdout);
    let (code, report, _) = run(bin().arg("check").arg(&path).env("REGION_SOLVE_SEED", "42"));
    assert_eq!(code, 0);
    assert_eq!(report["seed"], 42);
    let (code, _, _) = run(bin().arg("check").arg(&path).env("REGION_SOLVE_SEED", "x"));
    assert_eq!(code, 1);
}

#[test]
fn construct_pair_reports_summary() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pair.json");
    let (code, report, _) = run(bin()
        .arg("construct-pair")
        .arg(scenario("periodic_box.json"))
        .arg("--report")
        .arg(&file));
    assert_eq!(code, 0);
    assert_eq!(report["pair"]["provenance"], "constructed");
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(saved, report);
}
