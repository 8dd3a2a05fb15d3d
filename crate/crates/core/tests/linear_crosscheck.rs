//! Small-signal roll step about fail-safe trim: the closed Mode-1 roll
//! channel of the linear model against the nonlinear simulator.

use nalgebra::Vector3;
use t3_failsafe::allocation::{Mode, Motor};
use t3_failsafe::analysis::{relative_attitude_plant, LinearModelSet};
use t3_failsafe::control::TrimState;
use t3_failsafe::fault::FailureSchedule;
use t3_failsafe::sim::{self, Scenario, SetpointEvent, SetpointKind};

const STEP: f64 = 0.02;
const T_STEP: f64 = 25.0;
const WINDOW: f64 = 2.0;
const PEAK_FRACTION: f64 = 0.15;

fn nonlinear_roll_step() -> (Scenario, Vec<(f64, f64)>) {
    let mut sc = Scenario {
        duration: T_STEP + WINDOW + 0.01,
        failures: FailureSchedule::new(vec![(2.0, Motor::new(2).unwrap())]).unwrap(),
        ..Scenario::default()
    };
    let thrust = sc.params.hover_thrust();
    sc.setpoints.push(SetpointEvent {
        time: T_STEP,
        kind: SetpointKind::Attitude {
            attitude: Vector3::new(STEP, 0.0, 0.0),
            thrust,
        },
    });
    let out = sim::run(&sc).unwrap();
    assert_eq!(out.summary.detected_motor, Some(2));
    let base = out
        .records
        .iter()
        .find(|r| r.t >= T_STEP - 1e-9)
        .unwrap()
        .q_t[0];
    let response = out
        .records
        .iter()
        .filter(|r| r.t >= T_STEP - 1e-9 && r.t <= T_STEP + WINDOW + 1e-9)
        .map(|r| (r.t - T_STEP, r.q_t[0] - base))
        .collect();
    (sc, response)
}

#[test]
fn mode1_roll_step_matches_linear_channel() {
    let (sc, nonlinear) = nonlinear_roll_step();
    let alpha0 = TrimState::mode1(&sc.params).alpha_idle_exact;
    let models = LinearModelSet::build_with(
        &sc.params,
        &sc.gains,
        Some(Mode::One),
        relative_attitude_plant(&sc.params, alpha0),
    );
    let linear: Vec<(f64, f64)> = models.attitude_channels[0]
        .step_response(WINDOW, sc.physics_dt)
        .into_iter()
        .map(|(t, y)| (t, y * STEP))
        .collect();
    assert_eq!(linear.len(), nonlinear.len());

    let peak = linear.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
    let (mut worst, mut at) = (0.0_f64, 0.0);
    for ((t, y_nl), (_, y_lin)) in nonlinear.iter().zip(&linear) {
        let dev = (y_nl - y_lin).abs();
        if dev > worst {
            worst = dev;
            at = *t;
        }
    }
    assert!(
        worst <= PEAK_FRACTION * peak,
        "deviation {worst:.5} rad at t = {at:.3} s exceeds {PEAK_FRACTION} of the linear peak {peak:.5} rad"
    );
}
