//! Motor 2 stops during hover. Prints the recovery and compares the
//! steady fail-safe trim with its closed form.

use t3_failsafe::control::TrimState;
use t3_failsafe::sim::{self, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc: Scenario = include_str!("../scenarios/motor2_failure.scn").parse()?;
    let start = std::time::Instant::now();
    let out = sim::run(&sc)?;
    println!("simulated {:.0} s in {:.2?}", sc.duration, start.elapsed());

    println!(
        "{:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "t", "x", "roll", "pitch", "alpha_r", "F4", "tau_rs"
    );
    for r in out.records.iter().filter(|r| r.t >= 25.0).step_by(250) {
        println!(
            "{:6.2} {:8.4} {:8.4} {:8.4} {:8.4} {:8.4} {:8.4}",
            r.t, r.position[0], r.q_t[0], r.q_t[1], r.alpha[0], r.thrust_act[3], r.tau_rs
        );
    }

    let s = &out.summary;
    println!();
    println!(
        "detected motor {:?} after {:?} s",
        s.detected_motor, s.detection_latency
    );
    println!(
        "roll recovered after {:?} s, x converged after {:?} s",
        s.roll_recovery_time, s.convergence_time
    );
    println!(
        "largest tilt after the cut {:.3} rad",
        s.max_attitude_excursion
    );

    let p = sc.params;
    let trim = TrimState::mode1(&p);
    let st = &s.steady;
    println!();
    println!("{:>8} {:>10} {:>10}", "", "simulated", "trim");
    println!("{:>8} {:10.4} {:10.4}", "F4", st.f4, p.hover_thrust() / 2.0);
    println!("{:>8} {:10.4} {:10.4}", "d2", st.d2c, trim.d_idle);
    println!("{:>8} {:10.4} {:10.4}", "tau_rs", st.tau_rs, trim.tau_idle);
    println!(
        "{:>8} {:10.4} {:10.4}",
        "alpha_r", st.alpha_r, trim.alpha_idle_exact
    );

    let failures = sim::check_assertions(&sc.assertions, s);
    if failures.is_empty() {
        println!("\nall scenario assertions hold");
    }
    for f in failures {
        println!("assertion failed: {f}");
    }
    Ok(())
}
