use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_se2form"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn write_scenario(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("scenario.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn bundled() -> Value {
    serde_json::from_str(&std::fs::read_to_string(scenario_path("paper_sec5.json")).unwrap())
        .unwrap()
}

fn run(cmd: &mut Command) -> Output {
    cmd.env("SE2FORM_LOG", "error").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_and_classify() {
    let o = run(bin().arg("check").arg(scenario_path("paper_sec5.json")));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "ok: 3 vehicles, StrictRigidBody");

    let o = run(bin()
        .arg("classify")
        .arg(scenario_path("weak_sinusoid.json")));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "WeakRigidBody");
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(bin()
        .arg("simulate")
        .arg(scenario_path("paper_sec5.json"))
        .args(["--horizon", "5", "--step", "0.05", "--format", "csv,json"])
        .arg("--out")
        .arg(&out));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 101 * 3);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 101);
    assert_eq!(summary["horizon"], 5.0);
    assert!(!out.join("distances.svg").exists());
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = bundled();
    v["step"] = json!(0.0);
    let p = write_scenario(dir.path(), &v);
    let o = run(bin().arg("check").arg(&p));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`step`"));

    // The bundled gains fail the forward-motion guard.
    let o = run(bin()
        .arg("simulate")
        .arg(scenario_path("paper_sec5.json"))
        .arg("--strict-forward")
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(o.status.code(), Some(2));

    let o = run(bin()
        .arg("simulate")
        .arg(scenario_path("paper_sec5.json"))
        .args(["--format", "png"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_abort_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "horizon": 1.0,
        "leader": {
            "v": { "kind": "constant", "value": 0.06 },
            "omega": { "kind": "constant", "value": 0.05 }
        },
        "vehicles": [ { "theta": 0.0, "x": 0.2_f64.atanh(), "y": 0.0 } ],
        "tree": { "n_vehicles": 2, "edges": [ { "parent": 0, "child": 1, "offset": [0.0, 0.0] } ] },
        "gains": { "k1": 0.3, "k2": 0.3 },
        "objective": "StrictRigidBody",
        "guards": { "hold_on_degenerate": false }
    });
    let p = write_scenario(dir.path(), &v);
    let o = run(bin()
        .arg("simulate")
        .arg(&p)
        .arg("--out")
        .arg(dir.path().join("o")));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 0"));
}

#[test]
fn missing_file_exits_with_1() {
    let o = run(bin().arg("check").arg("/nonexistent/scenario.json"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_override_changes_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = bundled();
    v["placement"] = json!("on_orbit");
    v["vehicles"] = json!([]);
    v["initial_perturbation"] = json!({ "position": 0.2, "heading": 0.5 });
    let p = write_scenario(dir.path(), &v);
    let mut first_rows = Vec::new();
    for seed in ["1", "2", "1"] {
        let out = dir.path().join(format!("s{}", first_rows.len()));
        let o = run(bin()
            .arg("simulate")
            .arg(&p)
            .args(["--horizon", "0.1", "--format", "csv", "--seed", seed])
            .arg("--out")
            .arg(&out));
        assert_eq!(o.status.code(), Some(0));
        let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
        first_rows.push(csv.lines().nth(2).unwrap().to_string());
    }
    assert_ne!(first_rows[0], first_rows[1]);
    assert_eq!(first_rows[0], first_rows[2]);
}
