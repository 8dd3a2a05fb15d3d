//! Poles and DC gains of the linear fail-safe models, with the reference
//! relative-attitude model and with the one linearised from the plant.

use t3_failsafe::allocation::Mode;
use t3_failsafe::analysis::report::frequency_table;
use t3_failsafe::analysis::{relative_attitude_plant, log_grid, LinearModelSet};
use t3_failsafe::control::{ControllerGains, TrimState};
use t3_failsafe::dynamics::PlatformParams;

fn print(title: &str, set: &LinearModelSet) {
    println!("{title}");
    for (name, tf) in set.named() {
        let Ok(report) = tf.poles() else { continue };
        let dc = tf
            .dc_gain()
            .map_or("inf".to_string(), |g| format!("{g:.6}"));
        println!(
            "  {name:<20} order {:>2}  max Re {:>+10.4}  rhp {}  dc {dc}",
            report.roots.len(),
            report.max_real(),
            report.rhp_count()
        );
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = PlatformParams::prototype();
    let g = ControllerGains::prototype();

    let reference = LinearModelSet::build(&p, &g, Some(Mode::One));
    print("reference relative-attitude model", &reference);
    let id_poles = reference.relative_attitude.poles()?;
    let roots: Vec<String> = id_poles
        .roots
        .iter()
        .map(|r| format!("{:+.2}", r.re))
        .collect();
    println!("  relative-attitude poles: {}", roots.join(", "));

    let alpha0 = TrimState::mode1(&p).alpha_idle_exact;
    let plant = LinearModelSet::build_with(&p, &g, Some(Mode::One), relative_attitude_plant(&p, alpha0));
    println!();
    print("plant-linearised relative-attitude model", &plant);

    let table = frequency_table(&plant, &log_grid(0.1, 1000.0, 5))?;
    println!();
    for line in table
        .lines()
        .filter(|l| l.starts_with("model") || l.starts_with("failsafe_torque,"))
    {
        println!("{line}");
    }
    Ok(())
}
