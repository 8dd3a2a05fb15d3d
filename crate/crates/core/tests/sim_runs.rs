use std::path::Path;
use t3_failsafe::allocation::Motor;
use t3_failsafe::fault::FailureSchedule;
use t3_failsafe::sim::{
    self, read_csv, summarize, write_csv, AbortKind, RecordStatus, Scenario, SummaryConfig,
};

fn motor2_at(t: f64, duration: f64) -> Scenario {
    Scenario {
        duration,
        failures: FailureSchedule::new(vec![(t, Motor::new(2).unwrap())]).unwrap(),
        ..Scenario::default()
    }
}

fn load(name: &str) -> Scenario {
    Scenario::load(
        &Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("scenarios")
            .join(name),
    )
    .unwrap()
}

fn config(sc: &Scenario) -> SummaryConfig {
    SummaryConfig {
        convergence_threshold: sc.convergence_threshold,
        convergence_hold: sc.convergence_hold,
    }
}

#[test]
fn ten_ticks_give_header_and_ten_rows() {
    let sc = Scenario {
        duration: 0.01,
        ..Scenario::default()
    };
    let out = sim::run(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.csv");
    write_csv(&out.records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().next().unwrap().starts_with("t,x,y,z,"));
}

#[test]
fn reloaded_csv_reproduces_the_summary() {
    let sc = motor2_at(1.0, 8.0);
    let out = sim::run(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    write_csv(&out.records, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back, out.records);
    assert_eq!(summarize(&back, &sc.params, &config(&sc)), out.summary);
}

#[test]
fn repeated_runs_are_identical() {
    let sc = motor2_at(0.5, 3.0);
    let a = sim::run(&sc).unwrap();
    let b = sim::run(&sc).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.summary.to_json(), b.summary.to_json());
}

#[test]
fn halving_the_physics_step_keeps_recovery_times() {
    let coarse = motor2_at(4.0, 20.0);
    let fine = Scenario {
        physics_dt: coarse.physics_dt / 2.0,
        ..coarse.clone()
    };
    let a = sim::run(&coarse).unwrap().summary;
    let b = sim::run(&fine).unwrap().summary;
    let close = |x: Option<f64>, y: Option<f64>| {
        let (x, y) = (x.unwrap(), y.unwrap());
        (x - y).abs() <= 0.02 * x.abs().max(y.abs())
    };
    assert!(
        close(a.roll_recovery_time, b.roll_recovery_time),
        "{:?} vs {:?}",
        a.roll_recovery_time,
        b.roll_recovery_time
    );
    assert!(
        close(a.convergence_time, b.convergence_time),
        "{:?} vs {:?}",
        a.convergence_time,
        b.convergence_time
    );
    assert_eq!(a.detected_motor, b.detected_motor);
}

#[test]
fn opposite_dual_failure_aborts_with_a_diagnostic_row() {
    let sc = load("dual_opposite.scn");
    let out = sim::run(&sc).unwrap();
    let last = out.records.last().unwrap();
    assert_eq!(
        last.status,
        RecordStatus::Aborted(AbortKind::CapabilityLoss)
    );
    assert_eq!(last.failed_mask, 0b1010);
    assert_eq!(out.summary.abort.as_deref(), Some("capability_loss"));
    assert_eq!(out.summary.dual_failure_rank, Some(3));
    assert!(out.records[..out.records.len() - 1]
        .iter()
        .all(|r| r.status == RecordStatus::Ok));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dual.csv");
    write_csv(&out.records, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), out.records);
}

#[test]
fn divergence_leaves_a_final_record() {
    let sc = load("dual_adjacent.scn");
    let out = sim::run(&sc).unwrap();
    let last = out.records.last().unwrap();
    assert_eq!(last.status, RecordStatus::Aborted(AbortKind::Divergence));
    assert_eq!(out.aborted(), Some(AbortKind::Divergence));
    assert!(last.t > 4.0 && last.t < sc.duration);
    assert!(last.position.iter().all(|v| v.is_finite()));
    assert!(sim::check_assertions(&sc.assertions, &out.summary).is_empty());
}

#[test]
fn bundled_scenarios_meet_their_assertions() {
    for name in [
        "hover.scn",
        "motor2_failure.scn",
        "motor4_failure.scn",
        "dual_opposite.scn",
    ] {
        let sc = load(name);
        let out = sim::run(&sc).unwrap();
        let fails = sim::check_assertions(&sc.assertions, &out.summary);
        assert!(fails.is_empty(), "{name}: {fails:?}");
    }
}

#[test]
fn invalid_scenarios_are_rejected_before_running() {
    let bad = "duration = 1\nphysics_dt = 0.0007\n".parse::<Scenario>();
    let err = match bad {
        Ok(sc) => sim::run(&sc).unwrap_err().to_string(),
        Err(e) => e.to_string(),
    };
    assert!(
        err.contains("physics_dt") || err.contains("multiple"),
        "{err}"
    );
    assert!("no_such_key = 1".parse::<Scenario>().is_err());
    assert!("failure = 5 7".parse::<Scenario>().is_err());
}
