//! Faulty-motor detection from TP angular acceleration, and failure
//! injection for scenarios.
//!
//! A lost rotor leaves the opposite rotor's torque uncompensated, about
//! `0.25 l M g` on roll or pitch. The detector thresholds the measured TP
//! angular acceleration against a fraction `gamma` of that and maps the
//! crossing direction to the motor:
//!
//! | condition        | motor |
//! |------------------|-------|
//! | `q1'' >  beta`   | 4     |
//! | `q1'' < -beta`   | 2     |
//! | `q2'' >  beta`   | 3     |
//! | `q2'' < -beta`   | 1     |

use crate::allocation::{Mode, Motor};
use crate::dynamics::PlatformParams;
use std::collections::VecDeque;

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_FILTER_WINDOW: usize = 5;

/// `beta = gamma * 0.25 l M g / (J_T + J_F)` for roll and pitch.
pub fn beta_threshold(params: &PlatformParams, gamma: f64) -> [f64; 2] {
    let torque = 0.25 * params.arm * params.mass() * params.g;
    let j = params.j_total();
    [gamma * torque / j.x, gamma * torque / j.y]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultDetectorConfig {
    pub gamma: f64,
    /// Roll and pitch thresholds (rad/s^2).
    pub beta: [f64; 2],
    /// Samples in the moving average of differentiated rates.
    pub filter_window: usize,
}

impl FaultDetectorConfig {
    pub fn new(params: &PlatformParams, gamma: f64, filter_window: usize) -> Self {
        Self {
            gamma,
            beta: beta_threshold(params, gamma),
            filter_window,
        }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            errs.push(format!(
                "detector gamma must be in (0, 1] (got {})",
                self.gamma
            ));
        }
        if self.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            errs.push("detector beta must be positive".to_string());
        }
        if self.filter_window == 0 {
            errs.push("detector filter_window must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Roll,
    Pitch,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Roll => "roll",
            Axis::Pitch => "pitch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub motor: Motor,
    pub time: f64,
    pub axis: Axis,
    /// Angular acceleration that tripped the threshold (rad/s^2).
    pub value: f64,
}

impl Detection {
    pub fn mode(&self) -> Mode {
        self.motor.mode()
    }
}

/// Latched detector output; `None` until the first crossing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaultStatus(pub Option<Detection>);

impl FaultStatus {
    pub fn detected(&self) -> bool {
        self.0.is_some()
    }

    pub fn motor(&self) -> Option<Motor> {
        self.0.map(|d| d.motor)
    }
}

fn motor_for(axis: Axis, positive: bool) -> Motor {
    let idx = match (axis, positive) {
        (Axis::Roll, true) => 4,
        (Axis::Roll, false) => 2,
        (Axis::Pitch, true) => 3,
        (Axis::Pitch, false) => 1,
    };
    Motor::new(idx).expect("table entries are valid motors")
}

/// Threshold logic on one acceleration sample. A latched `prior` is
/// returned unchanged.
pub fn detect(
    config: &FaultDetectorConfig,
    qdd_roll: f64,
    qdd_pitch: f64,
    t: f64,
    prior: FaultStatus,
) -> FaultStatus {
    if prior.detected() {
        return prior;
    }
    let r_roll = qdd_roll.abs() / config.beta[0];
    let r_pitch = qdd_pitch.abs() / config.beta[1];
    let (axis, value, ratio) = if r_roll >= r_pitch {
        (Axis::Roll, qdd_roll, r_roll)
    } else {
        (Axis::Pitch, qdd_pitch, r_pitch)
    };
    if ratio > 1.0 {
        FaultStatus(Some(Detection {
            motor: motor_for(axis, value > 0.0),
            time: t,
            axis,
            value,
        }))
    } else {
        prior
    }
}

/// Sequential detector: differentiates sampled TP rates, smooths them with a
/// moving average and latches on the first threshold crossing.
#[derive(Debug, Clone)]
pub struct FaultDetector {
    config: FaultDetectorConfig,
    last: Option<(f64, [f64; 2])>,
    window: VecDeque<[f64; 2]>,
    status: FaultStatus,
}

impl FaultDetector {
    pub fn new(config: FaultDetectorConfig) -> Self {
        Self {
            config,
            last: None,
            window: VecDeque::with_capacity(config.filter_window),
            status: FaultStatus::default(),
        }
    }

    pub fn config(&self) -> &FaultDetectorConfig {
        &self.config
    }

    pub fn status(&self) -> FaultStatus {
        self.status
    }

    /// Latest smoothed acceleration estimate, if any.
    pub fn estimate(&self) -> Option<[f64; 2]> {
        if self.window.is_empty() {
            return None;
        }
        let n = self.window.len() as f64;
        let sum = self
            .window
            .iter()
            .fold([0.0, 0.0], |a, s| [a[0] + s[0], a[1] + s[1]]);
        Some([sum[0] / n, sum[1] / n])
    }

    /// Feeds the TP roll and pitch rates sampled at time `t`.
    pub fn update(&mut self, t: f64, roll_rate: f64, pitch_rate: f64) -> FaultStatus {
        if let Some((t0, [r0, p0])) = self.last {
            let dt = t - t0;
            if dt > 0.0 {
                if self.window.len() == self.config.filter_window {
                    self.window.pop_front();
                }
                self.window
                    .push_back([(roll_rate - r0) / dt, (pitch_rate - p0) / dt]);
            }
        }
        self.last = Some((t, [roll_rate, pitch_rate]));
        if self.window.len() == self.config.filter_window {
            let [a, b] = self.estimate().expect("window is full");
            self.status = detect(&self.config, a, b, t, self.status);
        }
        self.status
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("failure times must be non-decreasing ({0} after {1})")]
    Unsorted(f64, f64),
    #[error("{0} appears more than once in the failure schedule")]
    Duplicate(Motor),
    #[error("failure time {0} is not finite and non-negative")]
    BadTime(f64),
}

/// Motors forced to zero thrust from their scheduled time onward.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FailureSchedule {
    events: Vec<(f64, Motor)>,
}

impl FailureSchedule {
    pub fn new(events: Vec<(f64, Motor)>) -> Result<Self, ScheduleError> {
        for (i, &(t, m)) in events.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ScheduleError::BadTime(t));
            }
            if i > 0 && t < events[i - 1].0 {
                return Err(ScheduleError::Unsorted(t, events[i - 1].0));
            }
            if events[..i].iter().any(|&(_, other)| other == m) {
                return Err(ScheduleError::Duplicate(m));
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[(f64, Motor)] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Motors failed at time `t`, in failure order.
    pub fn failed_at(&self, t: f64) -> Vec<Motor> {
        self.events
            .iter()
            .filter(|(ts, _)| t >= *ts)
            .map(|&(_, m)| m)
            .collect()
    }

    pub fn first_failure_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.0)
    }

    /// Overrides commanded thrusts with zero for every failed motor.
    pub fn apply(&self, t: f64, thrusts: &[f64; 4]) -> [f64; 4] {
        let mut out = *thrusts;
        for m in self.failed_at(t) {
            out[m.slot()] = 0.0;
        }
        out
    }
}
