//! Nominal and fail-safe control allocation at hover thrust.

use t3_failsafe::allocation::{
    demix_nominal, dual_failure_allocator, solve_failsafe, ControlWrench, Motor,
};
use t3_failsafe::dynamics::PlatformParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = PlatformParams::prototype();
    let f_t = p.hover_thrust();
    let u = ControlWrench::new(0.02, -0.01, 0.005, f_t);

    let nominal = demix_nominal(&p, &u);
    println!("nominal thrusts   {:?}", nominal.command.thrusts);

    for m in Motor::ALL {
        let a = solve_failsafe(&p, m, &u, f_t)?;
        println!(
            "motor {} out ({:?}): F = [{:7.4} {:7.4} {:7.4} {:7.4}]  d = [{:+.4} {:+.4}]{}",
            m.index(),
            m.mode(),
            a.raw.thrusts[0],
            a.raw.thrusts[1],
            a.raw.thrusts[2],
            a.raw.thrusts[3],
            a.raw.cog[0],
            a.raw.cog[1],
            if a.saturated { "  (clipped)" } else { "" }
        );
    }

    println!();
    for (a, b) in [(1, 2), (2, 3), (3, 4), (1, 4), (1, 3), (2, 4)] {
        let d = dual_failure_allocator(&p, Motor::new(a)?, Motor::new(b)?, f_t)?;
        let sv: Vec<String> = d
            .singular_values
            .iter()
            .map(|s| format!("{s:.3e}"))
            .collect();
        println!(
            "motors {a}+{b} out: rank {}  singular values [{}]",
            d.rank,
            sv.join(", ")
        );
    }
    Ok(())
}
