//! Drives the detector from the open-loop plant: each motor in turn is cut
//! at hover and the detector isolates it from TP rates alone.

use nalgebra::Vector3;
use t3_failsafe::allocation::Motor;
use t3_failsafe::control::TrimState;
use t3_failsafe::dynamics::{step, ActuatorInputs, PlatformParams, PlatformState};
use t3_failsafe::fault::{
    FaultDetector, FaultDetectorConfig, DEFAULT_FILTER_WINDOW, DEFAULT_GAMMA,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = PlatformParams::prototype();
    let cfg = FaultDetectorConfig::new(&p, DEFAULT_GAMMA, DEFAULT_FILTER_WINDOW);
    println!(
        "thresholds: roll {:.3} rad/s^2, pitch {:.3} rad/s^2",
        cfg.beta[0], cfg.beta[1]
    );

    let dt = 1e-3;
    let cut = 0.1;
    for motor in Motor::ALL {
        let mut det = FaultDetector::new(cfg);
        let mut state = PlatformState::at_rest(Vector3::new(0.0, 0.0, -1.0), 0.0);
        let mut inputs = ActuatorInputs {
            thrusts: [p.hover_thrust() / 4.0; 4],
            ..Default::default()
        };
        let mut found = None;
        for k in 0..300 {
            let t = k as f64 * dt;
            if let Some(d) = det.update(t, state.w_t.x, state.w_t.y).0 {
                found = Some(d);
                break;
            }
            if t >= cut {
                inputs.thrusts[motor.slot()] = 0.0;
            }
            state = step(&p, &state, &inputs, dt)?;
        }
        match found {
            Some(d) => println!(
                "motor {} cut: detected motor {} on {} after {:.0} ms ({:+.2} rad/s^2), {:?}",
                motor.index(),
                d.motor.index(),
                d.axis.name(),
                (d.time - cut) * 1e3,
                d.value,
                d.mode()
            ),
            None => println!("motor {} cut: not detected", motor.index()),
        }
        let trim = TrimState::for_motor(&p, motor);
        println!(
            "    fail-safe trim: d = {:+.4} m, servo bias {:+.4} N m",
            trim.d_idle, trim.tau_idle
        );
    }
    Ok(())
}
