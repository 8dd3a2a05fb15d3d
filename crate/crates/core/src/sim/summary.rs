//! Run metrics computed from telemetry alone, so a reloaded CSV yields the
//! same summary.

use super::scenario::{AbortKind, Assertions};
use super::telemetry::{RecordStatus, TelemetryRecord};
use crate::allocation::{dual_failure_allocator, Motor};
use crate::dynamics::PlatformParams;
use serde::Serialize;
use std::path::Path;

/// Roll/pitch band used for attitude recovery (rad).
pub const ATTITUDE_RECOVERY_BAND: f64 = 0.1;
/// Length of the trailing averaging window (s).
pub const STEADY_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryConfig {
    pub convergence_threshold: f64,
    pub convergence_hold: f64,
}

/// Means over the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub window_start: f64,
    pub d1c: f64,
    pub d2c: f64,
    pub tau_rs: f64,
    pub tau_ps: f64,
    pub alpha_r: f64,
    pub alpha_p: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub total_thrust: f64,
    pub yaw_torque: f64,
    pub roll: f64,
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub ticks: usize,
    pub end_time: f64,
    pub failure_time: Option<f64>,
    pub failed_motors: Vec<u8>,
    pub detected_motor: Option<u8>,
    pub detection_time: Option<f64>,
    pub detection_latency: Option<f64>,
    /// Time after the failure until `|x - x_d|` stays inside the band for
    /// the hold time.
    pub convergence_time: Option<f64>,
    /// The same for `y`.
    pub convergence_time_y: Option<f64>,
    /// Time after the failure until roll and pitch stay below 0.1 rad for
    /// the hold time.
    pub roll_recovery_time: Option<f64>,
    /// Largest `|roll|` or `|pitch|` from the failure on (whole run if none).
    pub max_attitude_excursion: f64,
    /// Largest position error norm over the run.
    pub max_position_error: f64,
    /// Rank of the dual-failure allocation when two motors are out.
    pub dual_failure_rank: Option<usize>,
    pub steady: SteadyState,
    pub abort: Option<String>,
    pub abort_time: Option<f64>,
}

fn first_sustained(
    records: &[TelemetryRecord],
    from: f64,
    hold: f64,
    ok: impl Fn(&TelemetryRecord) -> bool,
) -> Option<f64> {
    let mut start: Option<f64> = None;
    for r in records
        .iter()
        .filter(|r| r.t >= from && r.status == RecordStatus::Ok)
    {
        if ok(r) {
            let s = *start.get_or_insert(r.t);
            if r.t - s >= hold - 1e-9 {
                return Some(s - from);
            }
        } else {
            start = None;
        }
    }
    None
}

fn mask_motors(mask: u8) -> Vec<u8> {
    (1..=4).filter(|k| mask & (1 << (k - 1)) != 0).collect()
}

pub fn summarize(
    records: &[TelemetryRecord],
    params: &PlatformParams,
    cfg: &SummaryConfig,
) -> Summary {
    let end_time = records.last().map_or(0.0, |r| r.t);
    let failure = records.iter().find(|r| r.failed_mask != 0);
    let failure_time = failure.map(|r| r.t);
    let last_mask = records.last().map_or(0, |r| r.failed_mask);
    let detection = records.iter().find(|r| r.fault_detected);
    let detection_time = detection.map(|r| r.t);
    let detection_latency = match (detection_time, failure_time) {
        (Some(d), Some(f)) => Some(d - f),
        _ => None,
    };
    let (conv_x, conv_y, recovery) = match failure_time {
        Some(f) => (
            first_sustained(records, f, cfg.convergence_hold, |r| {
                (r.position[0] - r.position_d[0]).abs() < cfg.convergence_threshold
            }),
            first_sustained(records, f, cfg.convergence_hold, |r| {
                (r.position[1] - r.position_d[1]).abs() < cfg.convergence_threshold
            }),
            first_sustained(records, f, cfg.convergence_hold, |r| {
                r.q_t[0].abs() < ATTITUDE_RECOVERY_BAND && r.q_t[1].abs() < ATTITUDE_RECOVERY_BAND
            }),
        ),
        None => (None, None, None),
    };
    let from = failure_time.unwrap_or(f64::NEG_INFINITY);
    let max_attitude_excursion = records
        .iter()
        .filter(|r| r.t >= from)
        .map(|r| r.q_t[0].abs().max(r.q_t[1].abs()))
        .fold(0.0, f64::max);
    let max_position_error = records
        .iter()
        .map(|r| {
            let e: f64 = (0..3)
                .map(|i| (r.position[i] - r.position_d[i]).powi(2))
                .sum();
            e.sqrt()
        })
        .fold(0.0, f64::max);
    let failed = mask_motors(last_mask);
    let dual_failure_rank = match failed.as_slice() {
        [a, b] => {
            let (a, b) = (
                Motor::new(*a).expect("mask bit"),
                Motor::new(*b).expect("mask bit"),
            );
            dual_failure_allocator(params, a, b, params.hover_thrust())
                .ok()
                .map(|d| d.rank)
        }
        _ => None,
    };
    let abort_rec = records.iter().find(|r| r.status != RecordStatus::Ok);
    let abort = abort_rec.map(|r| match r.status {
        RecordStatus::Aborted(k) => k.name().to_string(),
        RecordStatus::Ok => unreachable!(),
    });
    Summary {
        ticks: records
            .iter()
            .filter(|r| r.status == RecordStatus::Ok)
            .count(),
        end_time,
        failure_time,
        failed_motors: failed,
        detected_motor: detection.map(|r| r.fault_motor),
        detection_time,
        detection_latency,
        convergence_time: conv_x,
        convergence_time_y: conv_y,
        roll_recovery_time: recovery,
        max_attitude_excursion,
        max_position_error,
        dual_failure_rank,
        steady: steady_state(records),
        abort,
        abort_time: abort_rec.map(|r| r.t),
    }
}

fn steady_state(records: &[TelemetryRecord]) -> SteadyState {
    let end = records.last().map_or(0.0, |r| r.t);
    let window_start = end - STEADY_WINDOW;
    let win: Vec<&TelemetryRecord> = records
        .iter()
        .filter(|r| r.t >= window_start && r.status == RecordStatus::Ok)
        .collect();
    let n = win.len().max(1) as f64;
    let mean = |f: &dyn Fn(&TelemetryRecord) -> f64| win.iter().map(|r| f(r)).sum::<f64>() / n;
    SteadyState {
        window_start: window_start.max(0.0),
        d1c: mean(&|r| r.cog[0]),
        d2c: mean(&|r| r.cog[1]),
        tau_rs: mean(&|r| r.tau_rs),
        tau_ps: mean(&|r| r.tau_ps),
        alpha_r: mean(&|r| r.alpha[0]),
        alpha_p: mean(&|r| r.alpha[1]),
        f1: mean(&|r| r.thrust_act[0]),
        f2: mean(&|r| r.thrust_act[1]),
        f3: mean(&|r| r.thrust_act[2]),
        f4: mean(&|r| r.thrust_act[3]),
        total_thrust: mean(&|r| r.u[3]),
        yaw_torque: mean(&|r| r.u[2]),
        roll: mean(&|r| r.q_t[0]),
        pitch: mean(&|r| r.q_t[1]),
    }
}

/// Violated assertions, one message each.
pub fn check_assertions(a: &Assertions, s: &Summary) -> Vec<String> {
    let mut fails = Vec::new();
    let mut bound = |name: &str, value: Option<f64>, max: Option<f64>| {
        if let Some(max) = max {
            match value {
                Some(v) if v <= max => {}
                Some(v) => fails.push(format!("{name} = {v:.4} exceeds {max}")),
                None => fails.push(format!("{name} never reached (limit {max})")),
            }
        }
    };
    bound(
        "detection_latency",
        s.detection_latency,
        a.detection_latency_max,
    );
    bound(
        "convergence_time",
        s.convergence_time,
        a.convergence_time_max,
    );
    bound(
        "roll_recovery_time",
        s.roll_recovery_time,
        a.roll_recovery_max,
    );
    bound(
        "max_position_error",
        Some(s.max_position_error),
        a.max_position_error,
    );
    if let Some(expected) = a.detected_motor {
        let expected = expected.map(|m| m.index());
        if s.detected_motor != expected {
            let show = |m: Option<u8>| m.map_or("none".to_string(), |m| m.to_string());
            fails.push(format!(
                "detected motor {}, expected {}",
                show(s.detected_motor),
                show(expected)
            ));
        }
    }
    if let Some(expected) = a.abort {
        let got = s.abort.as_deref();
        if got != expected.map(AbortKind::name) {
            fails.push(format!(
                "abort = {}, expected {}",
                got.unwrap_or("none"),
                expected.map_or("none", AbortKind::name)
            ));
        }
    }
    fails
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            out.push(format!("{prefix} = {}", parts.join(", ")));
        }
        serde_json::Value::Null => out.push(format!("{prefix} = none")),
        serde_json::Value::String(s) => out.push(format!("{prefix} = {s}")),
        other => out.push(format!("{prefix} = {other}")),
    }
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises")
    }

    /// `key = value` lines, nested fields joined with dots.
    pub fn to_kv(&self) -> String {
        let v = serde_json::to_value(self).expect("summary serialises");
        let mut lines = Vec::new();
        flatten("", &v, &mut lines);
        lines.join("\n") + "\n"
    }

    /// JSON when the extension is `.json`, key/value lines otherwise.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = if path.extension().is_some_and(|e| e == "json") {
            self.to_json()
        } else {
            self.to_kv()
        };
        std::fs::write(path, text)
    }
}
