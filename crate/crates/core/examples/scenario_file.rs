//! Runs a scenario file, writes its telemetry and checks that the summary
//! computed from the reloaded CSV matches.
//!
//! cargo run --example scenario_file -- crates/core/scenarios/failsafe_steps.scn

use std::path::PathBuf;
use t3_failsafe::sim::{self, Scenario, SummaryConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/failsafe_steps.scn")
        });
    let sc = Scenario::load(&path)?;
    let out = sim::run(&sc)?;

    let csv = std::env::temp_dir().join("t3_scenario_file_example.csv");
    sim::write_csv(&out.records, &csv)?;
    let reloaded = sim::read_csv(&csv)?;
    let again = sim::summarize(
        &reloaded,
        &sc.params,
        &SummaryConfig {
            convergence_threshold: sc.convergence_threshold,
            convergence_hold: sc.convergence_hold,
        },
    );

    print!("{}", out.summary.to_kv());
    println!("telemetry: {} ({} rows)", csv.display(), out.records.len());
    println!(
        "summary from reloaded CSV matches: {}",
        again == out.summary
    );
    for f in sim::check_assertions(&sc.assertions, &out.summary) {
        println!("assertion failed: {f}");
    }
    Ok(())
}
