use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use t3_failsafe::sim::{self, AbortKind, Scenario};

#[derive(Parser)]
#[command(name = "t3sim", version, about = "Run T3 fail-safe flight scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario file.
    Run {
        scenario: PathBuf,
        /// Telemetry CSV (overrides the scenario's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary file: JSON if it ends in `.json`, key/value otherwise.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Reserved for sensor noise; runs are noiseless.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const EXIT_ASSERTION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

fn main() -> ExitCode {
    let Command::Run {
        scenario,
        out,
        summary,
        seed: _,
    } = Cli::parse().command;

    let sc = match Scenario::load(&scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match sim::run(&sc) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(path) = out.or_else(|| sc.output.clone()) {
        if let Err(e) = sim::write_csv(&result.records, &path) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match &summary {
        Some(path) => {
            if let Err(e) = result.summary.write(path) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        None => print!("{}", result.summary.to_kv()),
    }

    let failures = sim::check_assertions(&sc.assertions, &result.summary);
    let expected_divergence = sc.assertions.abort == Some(Some(AbortKind::Divergence));
    if result.aborted() == Some(AbortKind::Divergence) && !expected_divergence {
        eprintln!(
            "simulation diverged at t = {:.3} s",
            result.summary.abort_time.unwrap_or(f64::NAN)
        );
        return ExitCode::from(EXIT_DIVERGENCE);
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("assertion failed: {f}");
        }
        return ExitCode::from(EXIT_ASSERTION);
    }
    ExitCode::SUCCESS
}
