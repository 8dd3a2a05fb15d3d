//! CSV tables for frequency responses and pole locations.

use super::{AnalysisError, LinearModelSet};
use std::fmt::Write;

/// Columns: `model,omega,magnitude_db,phase_deg,at_pole`.
pub fn frequency_table(models: &LinearModelSet, omegas: &[f64]) -> Result<String, AnalysisError> {
    let mut out = String::from("model,omega,magnitude_db,phase_deg,at_pole\n");
    for (name, tf) in models.named() {
        for s in tf.frequency_response(omegas)? {
            match (s.magnitude_db(), s.phase_deg()) {
                (Some(m), Some(p)) => writeln!(out, "{name},{:.8e},{m:.8e},{p:.8e},0", s.omega),
                _ => writeln!(out, "{name},{:.8e},,,1", s.omega),
            }
            .expect("writing to a String");
        }
    }
    Ok(out)
}

/// Columns: `model,index,real,imag,stable` with `stable` repeated per row.
pub fn pole_table(models: &LinearModelSet) -> String {
    let mut out = String::from("model,index,real,imag,stable\n");
    for (name, tf) in models.named() {
        let Ok(report) = tf.poles() else { continue };
        for (i, r) in report.roots.iter().enumerate() {
            writeln!(
                out,
                "{name},{i},{:.8e},{:.8e},{}",
                r.re,
                r.im,
                u8::from(report.stable)
            )
            .expect("writing to a String");
        }
    }
    out
}
