//! Ten seconds of nominal hover with a 0.5 m climb halfway through.

use t3_failsafe::sim::{self, Scenario, SetpointEvent, SetpointKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = Scenario {
        duration: 10.0,
        ..Scenario::default()
    };
    sc.setpoints.push(SetpointEvent {
        time: 5.0,
        kind: SetpointKind::Height(1.5),
    });

    let out = sim::run(&sc)?;
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9}",
        "t", "x", "y", "height", "thrust"
    );
    for r in out.records.iter().step_by(500) {
        println!(
            "{:6.2} {:9.4} {:9.4} {:9.4} {:9.4}",
            r.t, r.position[0], r.position[1], -r.position[2], r.u[3]
        );
    }
    let s = &out.summary;
    println!(
        "max position error {:.3} m, detected {:?}",
        s.max_position_error, s.detected_motor
    );
    Ok(())
}
