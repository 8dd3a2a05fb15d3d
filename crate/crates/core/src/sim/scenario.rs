//! Line-oriented scenario files.
//!
//! Each non-empty line is `key = value`; `#` starts a comment. Vector values
//! are comma- or whitespace-separated. `setpoint` and `failure` may repeat
//! and must appear in time order. Every key is optional; an empty file is a
//! 30 s hover at 1 m with the default platform and gains.
//!
//! | key | value |
//! |-----|-------|
//! | `duration` | run length (s) |
//! | `control_rate` | controller and detector rate (Hz) |
//! | `physics_dt` | integrator step (s); `1/control_rate` must be a whole multiple |
//! | `params.m_t`, `params.m_f`, `params.d_t`, `params.d_f`, `params.arm`, `params.torque_coeff_ratio`, `params.g`, `params.f_max`, `params.servo_torque_limit` | scalar |
//! | `params.j_t`, `params.j_f` | three inertias |
//! | `gains.attitude`, `gains.failsafe`, `gains.servo`, `gains.yaw`, `gains.position`, `gains.height` | `kp, ki, kd` |
//! | `gains.bessel_cutoff` | Hz |
//! | `limits.max_tilt`, `limits.attitude_slew`, `limits.yaw_slew`, `limits.yaw_torque`, `limits.alpha_bandwidth` | scalar |
//! | `limits.bessel_order` | integer |
//! | `limits.failsafe_derivative` | `error` or `measurement` |
//! | `detector.gamma`, `detector.filter_window` | scalar, integer |
//! | `initial.position` | `x, y, z` (m, z down) |
//! | `initial.yaw` | rad |
//! | `setpoint` | `<t> position <x> <y> <z>`, `<t> height <h>`, `<t> yaw <rad>` or `<t> attitude <roll> <pitch> <yaw> <thrust>` |
//! | `failure` | `<t> <motor 1-4>` |
//! | `convergence_threshold` | position band (m) |
//! | `convergence_hold` | time the band must hold (s) |
//! | `output` | CSV path |
//! | `assert.detection_latency_max`, `assert.convergence_time_max`, `assert.roll_recovery_max`, `assert.max_position_error` | s, s, s, m |
//! | `assert.detected_motor` | 1-4, or `none` for no detection |
//! | `assert.abort` | `none`, `capability_loss` or `divergence` |

use crate::allocation::Motor;
use crate::control::{bessel, ControllerGains, ControllerLimits, DerivativeMode, PidGains};
use crate::dynamics::PlatformParams;
use crate::fault::{FailureSchedule, FaultDetectorConfig, DEFAULT_FILTER_WINDOW, DEFAULT_GAMMA};
use nalgebra::Vector3;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetpointKind {
    Position(Vector3<f64>),
    /// Height above the origin, i.e. `-z`.
    Height(f64),
    Yaw(f64),
    Attitude {
        attitude: Vector3<f64>,
        thrust: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetpointEvent {
    pub time: f64,
    pub kind: SetpointKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortKind {
    CapabilityLoss,
    Divergence,
}

impl AbortKind {
    pub fn name(self) -> &'static str {
        match self {
            AbortKind::CapabilityLoss => "capability_loss",
            AbortKind::Divergence => "divergence",
        }
    }
}

/// Pass/fail checks evaluated on the run summary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Assertions {
    pub detection_latency_max: Option<f64>,
    pub convergence_time_max: Option<f64>,
    pub roll_recovery_max: Option<f64>,
    pub max_position_error: Option<f64>,
    /// `Some(None)` requires that nothing is detected.
    pub detected_motor: Option<Option<Motor>>,
    /// `Some(None)` requires a clean run.
    pub abort: Option<Option<AbortKind>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: PlatformParams,
    pub gains: ControllerGains,
    pub limits: ControllerLimits,
    pub detector: FaultDetectorConfig,
    pub duration: f64,
    pub control_rate: f64,
    pub physics_dt: f64,
    pub initial_position: Vector3<f64>,
    pub initial_yaw: f64,
    pub setpoints: Vec<SetpointEvent>,
    pub failures: FailureSchedule,
    pub convergence_threshold: f64,
    pub convergence_hold: f64,
    pub output: Option<PathBuf>,
    pub assertions: Assertions,
}

impl Default for Scenario {
    fn default() -> Self {
        let params = PlatformParams::prototype();
        Self {
            params,
            gains: ControllerGains::prototype(),
            limits: ControllerLimits::default(),
            detector: FaultDetectorConfig::new(&params, DEFAULT_GAMMA, DEFAULT_FILTER_WINDOW),
            duration: 30.0,
            control_rate: 1000.0,
            physics_dt: 1e-3,
            initial_position: Vector3::new(0.0, 0.0, -1.0),
            initial_yaw: 0.0,
            setpoints: Vec::new(),
            failures: FailureSchedule::default(),
            convergence_threshold: 0.2,
            convergence_hold: 3.0,
            output: None,
            assertions: Assertions::default(),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Physics steps per control tick.
    pub fn substeps(&self) -> usize {
        (1.0 / (self.control_rate * self.physics_dt))
            .round()
            .max(1.0) as usize
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.control_rate
    }

    /// Control ticks in the run.
    pub fn ticks(&self) -> usize {
        (self.duration * self.control_rate).round() as usize
    }

    /// Collects every violated invariant.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        if let Err(e) = self.params.validate() {
            errs.extend(e);
        }
        if let Err(e) = self.gains.validate() {
            errs.extend(e);
        }
        if let Err(e) = self.detector.validate() {
            errs.extend(e);
        }
        let l = &self.limits;
        for (name, v) in [
            ("limits.max_tilt", l.max_tilt),
            ("limits.attitude_slew", l.attitude_slew),
            ("limits.yaw_slew", l.yaw_slew),
            ("limits.yaw_torque", l.yaw_torque),
            ("limits.alpha_bandwidth", l.alpha_bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be positive"));
            }
        }
        if l.max_tilt >= std::f64::consts::FRAC_PI_2 {
            errs.push("limits.max_tilt must be below pi/2".into());
        }
        if l.bessel_order == 0 || l.bessel_order > bessel::MAX_ORDER {
            errs.push(format!(
                "limits.bessel_order must be in 1..={}",
                bessel::MAX_ORDER
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            errs.push("duration must be positive".into());
        }
        let rate_ok = self.control_rate > 0.0 && self.control_rate.is_finite();
        let dt_ok = self.physics_dt > 0.0 && self.physics_dt.is_finite();
        if !rate_ok {
            errs.push("control_rate must be positive".into());
        }
        if !dt_ok {
            errs.push("physics_dt must be positive".into());
        }
        if rate_ok && dt_ok {
            let ratio = 1.0 / (self.control_rate * self.physics_dt);
            if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
                errs.push(format!(
                    "control period 1/{} s is not a whole multiple of physics_dt {}",
                    self.control_rate, self.physics_dt
                ));
            }
            if self.gains.bessel_cutoff_hz >= 0.5 * self.control_rate {
                errs.push("gains.bessel_cutoff must be below half the control rate".into());
            }
        }
        for w in self.setpoints.windows(2) {
            if w[1].time < w[0].time {
                errs.push(format!(
                    "setpoint at t={} follows t={}",
                    w[1].time, w[0].time
                ));
            }
        }
        for s in &self.setpoints {
            if !(s.time >= 0.0 && s.time.is_finite()) {
                errs.push(format!(
                    "setpoint time {} must be finite and non-negative",
                    s.time
                ));
            }
            if let SetpointKind::Attitude { thrust, .. } = s.kind {
                if thrust < 0.0 {
                    errs.push(format!(
                        "attitude setpoint at t={} has negative thrust",
                        s.time
                    ));
                }
            }
        }
        for (name, v) in [
            ("convergence_threshold", self.convergence_threshold),
            ("convergence_hold", self.convergence_hold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be positive"));
            }
        }
        let pos = self.initial_position;
        if pos.iter().any(|c| !c.is_finite()) || !self.initial_yaw.is_finite() {
            errs.push("initial state must be finite".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Parse {
            line: self.no,
            key: self.key.to_string(),
            message: message.into(),
        }
    }

    fn tokens(&self) -> Vec<&str> {
        self.value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect()
    }

    fn parse_tok<T: FromStr>(&self, tok: &str) -> Result<T, ScenarioError> {
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }

    fn numbers<const N: usize>(&self) -> Result<[f64; N], ScenarioError> {
        let toks = self.tokens();
        if toks.len() != N {
            return Err(self.err(format!("expected {N} number(s), found {}", toks.len())));
        }
        let mut out = [0.0; N];
        for (o, t) in out.iter_mut().zip(toks) {
            *o = self.parse_tok(t)?;
        }
        Ok(out)
    }

    fn scalar(&self) -> Result<f64, ScenarioError> {
        Ok(self.numbers::<1>()?[0])
    }

    fn integer(&self) -> Result<usize, ScenarioError> {
        let toks = self.tokens();
        match toks.as_slice() {
            [t] => self.parse_tok(t),
            _ => Err(self.err("expected one integer")),
        }
    }

    fn vector(&self) -> Result<Vector3<f64>, ScenarioError> {
        let [a, b, c] = self.numbers::<3>()?;
        Ok(Vector3::new(a, b, c))
    }

    fn pid(&self) -> Result<PidGains, ScenarioError> {
        let [kp, ki, kd] = self.numbers::<3>()?;
        Ok(PidGains::new(kp, ki, kd))
    }

    fn motor(&self, tok: &str) -> Result<Motor, ScenarioError> {
        let idx: u8 = self.parse_tok(tok)?;
        Motor::new(idx).map_err(|e| self.err(e.to_string()))
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut s = Scenario::default();
        let mut gamma = DEFAULT_GAMMA;
        let mut window = DEFAULT_FILTER_WINDOW;
        let mut failures = Vec::new();
        let mut failure_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError::Parse {
                    line: i + 1,
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let line = Line {
                no: i + 1,
                key: key.trim(),
                value: value.trim(),
            };
            let p = &mut s.params;
            let g = &mut s.gains;
            match line.key {
                "duration" => s.duration = line.scalar()?,
                "control_rate" => s.control_rate = line.scalar()?,
                "physics_dt" => s.physics_dt = line.scalar()?,
                "params.m_t" => p.m_t = line.scalar()?,
                "params.m_f" => p.m_f = line.scalar()?,
                "params.d_t" => p.d_t = line.scalar()?,
                "params.d_f" => p.d_f = line.scalar()?,
                "params.arm" => p.arm = line.scalar()?,
                "params.torque_coeff_ratio" => p.torque_coeff_ratio = line.scalar()?,
                "params.j_t" => p.j_t = line.vector()?,
                "params.j_f" => p.j_f = line.vector()?,
                "params.g" => p.g = line.scalar()?,
                "params.f_max" => p.f_max = line.scalar()?,
                "params.servo_torque_limit" => p.servo_torque_limit = line.scalar()?,
                "gains.attitude" => g.attitude = line.pid()?,
                "gains.failsafe" => g.failsafe = line.pid()?,
                "gains.servo" => g.servo = line.pid()?,
                "gains.yaw" => g.yaw = line.pid()?,
                "gains.position" => g.position = line.pid()?,
                "gains.height" => g.height = line.pid()?,
                "gains.bessel_cutoff" => g.bessel_cutoff_hz = line.scalar()?,
                "limits.max_tilt" => s.limits.max_tilt = line.scalar()?,
                "limits.attitude_slew" => s.limits.attitude_slew = line.scalar()?,
                "limits.yaw_slew" => s.limits.yaw_slew = line.scalar()?,
                "limits.yaw_torque" => s.limits.yaw_torque = line.scalar()?,
                "limits.alpha_bandwidth" => s.limits.alpha_bandwidth = line.scalar()?,
                "limits.bessel_order" => s.limits.bessel_order = line.integer()?,
                "limits.failsafe_derivative" => {
                    s.limits.failsafe_derivative = match line.value {
                        "error" => DerivativeMode::Error,
                        "measurement" => DerivativeMode::Measurement,
                        other => {
                            return Err(line.err(format!(
                                "expected `error` or `measurement`, found `{other}`"
                            )))
                        }
                    }
                }
                "detector.gamma" => gamma = line.scalar()?,
                "detector.filter_window" => window = line.integer()?,
                "initial.position" => s.initial_position = line.vector()?,
                "initial.yaw" => s.initial_yaw = line.scalar()?,
                "setpoint" => s.setpoints.push(parse_setpoint(&line)?),
                "failure" => {
                    let toks = line.tokens();
                    let [t, m] = toks.as_slice() else {
                        return Err(line.err("expected `<time> <motor>`"));
                    };
                    failures.push((line.parse_tok::<f64>(t)?, line.motor(m)?));
                    failure_line = line.no;
                }
                "convergence_threshold" => s.convergence_threshold = line.scalar()?,
                "convergence_hold" => s.convergence_hold = line.scalar()?,
                "output" => s.output = Some(PathBuf::from(line.value)),
                "assert.detection_latency_max" => {
                    s.assertions.detection_latency_max = Some(line.scalar()?)
                }
                "assert.convergence_time_max" => {
                    s.assertions.convergence_time_max = Some(line.scalar()?)
                }
                "assert.roll_recovery_max" => s.assertions.roll_recovery_max = Some(line.scalar()?),
                "assert.max_position_error" => {
                    s.assertions.max_position_error = Some(line.scalar()?)
                }
                "assert.detected_motor" => {
                    s.assertions.detected_motor = Some(match line.value {
                        "none" => None,
                        v => Some(line.motor(v)?),
                    })
                }
                "assert.abort" => {
                    s.assertions.abort = Some(match line.value {
                        "none" => None,
                        "capability_loss" => Some(AbortKind::CapabilityLoss),
                        "divergence" => Some(AbortKind::Divergence),
                        other => return Err(line.err(format!("unknown abort kind `{other}`"))),
                    })
                }
                _ => return Err(line.err("unknown key")),
            }
        }
        s.failures = FailureSchedule::new(failures).map_err(|e| ScenarioError::Parse {
            line: failure_line,
            key: "failure".into(),
            message: e.to_string(),
        })?;
        s.detector = FaultDetectorConfig::new(&s.params, gamma, window);
        s.validate()?;
        Ok(s)
    }
}

fn parse_setpoint(line: &Line) -> Result<SetpointEvent, ScenarioError> {
    let toks = line.tokens();
    let (Some(t), Some(kind)) = (toks.first(), toks.get(1)) else {
        return Err(line.err("expected `<time> <kind> <values...>`"));
    };
    let time: f64 = line.parse_tok(t)?;
    let vals = toks[2..]
        .iter()
        .map(|v| line.parse_tok::<f64>(v))
        .collect::<Result<Vec<_>, _>>()?;
    let kind = match (*kind, vals.as_slice()) {
        ("position", [x, y, z]) => SetpointKind::Position(Vector3::new(*x, *y, *z)),
        ("height", [h]) => SetpointKind::Height(*h),
        ("yaw", [y]) => SetpointKind::Yaw(*y),
        ("attitude", [r, p, y, f]) => SetpointKind::Attitude {
            attitude: Vector3::new(*r, *p, *y),
            thrust: *f,
        },
        ("position" | "height" | "yaw" | "attitude", _) => {
            return Err(line.err(format!("wrong number of values for `{kind}` setpoint")))
        }
        (other, _) => return Err(line.err(format!("unknown setpoint kind `{other}`"))),
    };
    Ok(SetpointEvent { time, kind })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default_hover() {
        let s: Scenario = "".parse().unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.duration, 30.0);
        assert_eq!(s.params, PlatformParams::prototype());
        assert_eq!(s.ticks(), 30_000);
    }

    #[test]
    fn full_example() {
        let text = "\
# motor 2 cut during hover
duration = 40
failure = 26 2
setpoint = 0 position 0, 0, -1
setpoint = 30 yaw 0.5
gains.servo = 5 0.1 3
detector.gamma = 0.5
assert.detection_latency_max = 0.2
assert.abort = none
";
        let s: Scenario = text.parse().unwrap();
        assert_eq!(s.failures.events(), &[(26.0, Motor::new(2).unwrap())]);
        assert_eq!(s.setpoints.len(), 2);
        assert_eq!(s.assertions.abort, Some(None));
        assert_eq!(s.assertions.detection_latency_max, Some(0.2));
    }

    #[test]
    fn errors_carry_line_and_key() {
        let e = "duration = 3\nbogus = 1\n".parse::<Scenario>().unwrap_err();
        match e {
            ScenarioError::Parse { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "bogus");
            }
            other => panic!("unexpected {other}"),
        }
        let e = "gains.attitude = 1 2\n".parse::<Scenario>().unwrap_err();
        assert!(e.to_string().contains("line 1"));
        assert!("failure = 1 7".parse::<Scenario>().is_err());
        assert!("setpoint = 1 spin 3".parse::<Scenario>().is_err());
    }

    #[test]
    fn rate_mismatch_and_exhaustive_listing() {
        let e = "control_rate = 300\nphysics_dt = 0.001\n"
            .parse::<Scenario>()
            .unwrap_err();
        assert!(matches!(e, ScenarioError::Invalid(ref v) if v.len() == 1));
        let e = "control_rate = 300\nduration = -1\ngains.height = -1, 0, 0\n"
            .parse::<Scenario>()
            .unwrap_err();
        let ScenarioError::Invalid(v) = e else {
            panic!()
        };
        assert_eq!(v.len(), 3, "{v:?}");
        assert!("control_rate = 500\nphysics_dt = 0.001\n"
            .parse::<Scenario>()
            .is_ok());
    }

    #[test]
    fn unsorted_schedules_rejected() {
        assert!("failure = 5 2\nfailure = 3 1\n"
            .parse::<Scenario>()
            .is_err());
        assert!("setpoint = 5 yaw 1\nsetpoint = 3 yaw 0\n"
            .parse::<Scenario>()
            .is_err());
    }
}
