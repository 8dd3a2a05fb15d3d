use std::path::Path;
use std::process::Command;

fn t3sim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_t3sim"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn passing_run_writes_telemetry_and_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "hover.scn",
        "duration = 1\nassert.detected_motor = none\n",
    );
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("summary.json");
    let out = t3sim(&[
        "run",
        &sc,
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        json.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1001);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["ticks"], 1000);
    assert!(v["detected_motor"].is_null());
}

#[test]
fn key_value_summary_goes_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "short.scn", "duration = 0.05\n");
    let out = t3sim(&["run", &sc]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "ticks = 50"), "{text}");
    assert!(text.lines().any(|l| l == "abort = none"));
}

#[test]
fn violated_assertion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "wrong.scn",
        "duration = 2\nfailure = 1 2\nassert.detected_motor = 3\n",
    );
    let out = t3sim(&["run", &sc]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detected motor 2, expected 3"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "bad.scn", "duration = 1\ngains.servo = 1, 2\n");
    assert_eq!(t3sim(&["run", &sc]).status.code(), Some(2));
    assert_eq!(
        t3sim(&["run", "/nonexistent/scenario.scn"]).status.code(),
        Some(2)
    );
}

#[test]
fn unexpected_divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "adjacent.scn",
        "duration = 15\nfailure = 3 2\nfailure = 4 1\n",
    );
    let csv = dir.path().join("adjacent.csv");
    let out = t3sim(&["run", &sc, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(
        text.lines().last().unwrap().ends_with("divergence"),
        "{}",
        text.lines().last().unwrap()
    );
}

#[test]
fn expected_divergence_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "adjacent.scn",
        "duration = 15\nfailure = 3 2\nfailure = 4 1\nassert.abort = divergence\n",
    );
    assert_eq!(t3sim(&["run", &sc]).status.code(), Some(0));
}
