//! Linear models of the torque-generation and attitude loops, with pole and
//! frequency-response evaluation.

mod poly;
pub mod report;

pub use poly::Polynomial;

use crate::allocation::Mode;
use crate::control::{bessel, ControllerGains, PidGains};
use crate::dynamics::PlatformParams;
use nalgebra::Complex;
use std::f64::consts::PI;

/// Real parts at or above this are not stable.
pub const STABILITY_MARGIN: f64 = -1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("transfer function denominator is identically zero")]
    ZeroDenominator,
    #[error("pole analysis needs a denominator of degree >= 1")]
    NoPoles,
    #[error("frequency grid must be positive and sorted ascending")]
    BadGrid,
}

/// `num(s) / den(s)`, stored with a monic denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalTransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, AnalysisError> {
        if den.is_zero() {
            return Err(AnalysisError::ZeroDenominator);
        }
        let k = 1.0 / den.leading();
        Ok(Self {
            num: num.scale(k),
            den: den.scale(k),
        })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, AnalysisError> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn gain(k: f64) -> Self {
        Self::new(Polynomial::constant(k), Polynomial::constant(1.0)).expect("unit denominator")
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn series(&self, other: &Self) -> Self {
        Self::new(&self.num * &other.num, &self.den * &other.den)
            .expect("product of nonzero denominators")
    }

    /// Unity negative feedback around `self`: `G / (1 + G)`.
    pub fn feedback(&self) -> Self {
        Self::new(self.num.clone(), &self.den + &self.num)
            .expect("monic denominator survives feedback")
    }

    /// `None` when `s` sits on a pole.
    pub fn eval(&self, s: Complex<f64>) -> Option<Complex<f64>> {
        let d = self.den.eval_complex(s);
        let scale = self
            .den
            .coeffs()
            .iter()
            .map(|c| c.abs())
            .fold(0.0, f64::max)
            * (1.0 + s.norm()).powi(self.den.degree() as i32);
        if d.norm() <= 1e-14 * scale {
            None
        } else {
            Some(self.num.eval_complex(s) / d)
        }
    }

    /// Value at `s = 0`, or `None` for a pole at the origin.
    pub fn dc_gain(&self) -> Option<f64> {
        self.eval(Complex::new(0.0, 0.0)).map(|z| z.re)
    }

    pub fn poles(&self) -> Result<PoleReport, AnalysisError> {
        if self.den.degree() == 0 {
            return Err(AnalysisError::NoPoles);
        }
        let roots = self.den.roots();
        let stable = roots.iter().all(|r| r.re < STABILITY_MARGIN);
        Ok(PoleReport { roots, stable })
    }

    pub fn zeros(&self) -> Vec<Complex<f64>> {
        self.num.roots()
    }

    /// Samples `self(j omega)` over an ascending positive grid.
    pub fn frequency_response(
        &self,
        omegas: &[f64],
    ) -> Result<Vec<FrequencySample>, AnalysisError> {
        if omegas.iter().any(|w| !(*w > 0.0 && w.is_finite()))
            || omegas.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(AnalysisError::BadGrid);
        }
        Ok(omegas
            .iter()
            .map(|&omega| FrequencySample {
                omega,
                value: self.eval(Complex::new(0.0, omega)),
            })
            .collect())
    }

    /// Step response sampled every `dt` up to `t_end` (controllable
    /// canonical realisation, RK4 with internal substeps).
    pub fn step_response(&self, t_end: f64, dt: f64) -> Vec<(f64, f64)> {
        let n = self.den.degree();
        let a: Vec<f64> = self.den.coeffs()[1..].to_vec();
        let mut b = vec![0.0; n + 1];
        let nc = self.num.coeffs();
        b[n + 1 - nc.len()..].copy_from_slice(nc);
        let d = b[0];
        // y = C x + D u with C_i = b_{i+1} - a_i d (descending index).
        let c: Vec<f64> = (0..n).map(|i| b[i + 1] - a[i] * d).collect();
        let fastest = self
            .den
            .roots()
            .iter()
            .map(|r| r.norm())
            .fold(1.0, f64::max);
        let sub = ((dt * fastest / 0.5).ceil() as usize).max(1);
        let h = dt / sub as f64;
        let deriv = |x: &[f64]| -> Vec<f64> {
            let mut dx = vec![0.0; n];
            if n == 0 {
                return dx;
            }
            dx[0] = 1.0 - a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>();
            for i in 1..n {
                dx[i] = x[i - 1];
            }
            dx
        };
        let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(a, b)| a + s * b).collect()
        };
        let mut x = vec![0.0; n];
        let out = |x: &[f64]| c.iter().zip(x).map(|(ci, xi)| ci * xi).sum::<f64>() + d;
        let steps = (t_end / dt).round() as usize;
        let mut samples = Vec::with_capacity(steps + 1);
        samples.push((0.0, out(&x)));
        for k in 1..=steps {
            for _ in 0..sub {
                let k1 = deriv(&x);
                let k2 = deriv(&axpy(&x, &k1, h / 2.0));
                let k3 = deriv(&axpy(&x, &k2, h / 2.0));
                let k4 = deriv(&axpy(&x, &k3, h));
                for i in 0..n {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            samples.push((k as f64 * dt, out(&x)));
        }
        samples
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleReport {
    pub roots: Vec<Complex<f64>>,
    /// Every real part below `STABILITY_MARGIN`.
    pub stable: bool,
}

impl PoleReport {
    pub fn rhp_count(&self) -> usize {
        self.roots.iter().filter(|r| r.re > 0.0).count()
    }

    pub fn max_real(&self) -> f64 {
        self.roots
            .iter()
            .map(|r| r.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySample {
    pub omega: f64,
    /// `None` at a pole.
    pub value: Option<Complex<f64>>,
}

impl FrequencySample {
    pub fn magnitude_db(&self) -> Option<f64> {
        self.value.map(|v| 20.0 * v.norm().log10())
    }

    pub fn phase_deg(&self) -> Option<f64> {
        self.value.map(|v| v.arg().to_degrees())
    }
}

/// Log-spaced grid from `lo` to `hi` rad/s.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1).max(1) as f64))
        .collect()
}

/// Derivative roll-off used to keep PID transfer functions proper: ten
/// times the command-filter cutoff.
pub fn derivative_rolloff(gains: &ControllerGains) -> f64 {
    10.0 * 2.0 * PI * gains.bessel_cutoff_hz
}

/// `Kp + Ki/s + Kd s/(1 + s/wf)`.
pub fn pid_tf(g: &PidGains, rolloff: f64) -> RationalTransferFunction {
    let s = Polynomial::s();
    let one = Polynomial::constant(1.0);
    let filt = if g.kd != 0.0 {
        &one + &s.scale(1.0 / rolloff)
    } else {
        one.clone()
    };
    let (num, den) = if g.ki != 0.0 {
        let num = &(&(&s * &filt).scale(g.kp) + &filt.scale(g.ki)) + &(&s * &s).scale(g.kd);
        (num, &s * &filt)
    } else {
        (&filt.scale(g.kp) + &s.scale(g.kd), filt)
    };
    RationalTransferFunction::new(num, den).expect("nonzero PID denominator")
}

/// Servo-torque to relative-roll model in its reference form:
/// `(J1T + J1F) / (J1T J1F s^2 - mF dF g)`.
pub fn relative_attitude(params: &PlatformParams) -> RationalTransferFunction {
    let (jt, jf) = (params.j_t.x, params.j_f.x);
    RationalTransferFunction::from_coeffs(
        &[jt + jf],
        &[jt * jf, 0.0, -params.m_f * params.d_f * params.g],
    )
    .expect("positive inertias")
}

/// Servo-torque to relative-roll model linearised from the simulated plant
/// about relative roll `alpha0` at hover thrust:
/// `(J1T + J1F) / (J1T J1F s^2 + J1T mF dF g cos(alpha0))`.
pub fn relative_attitude_plant(params: &PlatformParams, alpha0: f64) -> RationalTransferFunction {
    let (jt, jf) = (params.j_t.x, params.j_f.x);
    let stiffness = params.m_f * params.d_f * params.g * alpha0.cos();
    RationalTransferFunction::from_coeffs(&[jt + jf], &[jt * jf, 0.0, jt * stiffness])
        .expect("positive inertias")
}

/// Servo-controller transfer function.
pub fn servo_controller(gains: &ControllerGains) -> RationalTransferFunction {
    pid_tf(&gains.servo, derivative_rolloff(gains))
}

/// Closed servo loop around a relative-attitude model:
/// `SC ID / (1 + SC ID)`.
pub fn failsafe_torque_with(
    sc: &RationalTransferFunction,
    id: &RationalTransferFunction,
) -> RationalTransferFunction {
    sc.series(id).feedback()
}

/// Fail-safe torque transfer function from the reference `relative_attitude`.
pub fn failsafe_torque(params: &PlatformParams, gains: &ControllerGains) -> RationalTransferFunction {
    failsafe_torque_with(&servo_controller(gains), &relative_attitude(params))
}

/// Attitude axis index 0 = roll, 1 = pitch, 2 = yaw.
pub fn torque_to_attitude_nominal(params: &PlatformParams, axis: usize) -> RationalTransferFunction {
    let j = params.j_total()[axis];
    RationalTransferFunction::from_coeffs(&[1.0], &[j, 0.0, 0.0]).expect("positive inertia")
}

/// Torque-to-attitude model of `axis` under `mode`; the crippled axis sees
/// only the TP inertia behind the fail-safe torque loop `fs`.
pub fn torque_to_attitude(
    params: &PlatformParams,
    axis: usize,
    mode: Option<Mode>,
    fs: &RationalTransferFunction,
) -> RationalTransferFunction {
    match (mode, axis) {
        (Some(Mode::One), 0) | (Some(Mode::Two), 1) => {
            let tp = RationalTransferFunction::from_coeffs(&[1.0], &[params.j_t[axis], 0.0, 0.0])
                .expect("positive inertia");
            tp.series(fs)
        }
        _ => torque_to_attitude_nominal(params, axis),
    }
}

fn crippled(mode: Option<Mode>, axis: usize) -> bool {
    matches!((mode, axis), (Some(Mode::One), 0) | (Some(Mode::Two), 1))
}

/// Closed attitude/thrust channels `I_X / I_X,d` (roll, pitch, yaw, thrust)
/// given the fail-safe torque loop `fs`.
pub fn attitude_channels_with(
    params: &PlatformParams,
    gains: &ControllerGains,
    mode: Option<Mode>,
    fs: &RationalTransferFunction,
) -> [RationalTransferFunction; 4] {
    let wf = derivative_rolloff(gains);
    let channel = |axis: usize| {
        let pid = match axis {
            2 => &gains.yaw,
            _ if crippled(mode, axis) => &gains.failsafe,
            _ => &gains.attitude,
        };
        pid_tf(pid, wf)
            .series(&torque_to_attitude(params, axis, mode, fs))
            .feedback()
    };
    [
        channel(0),
        channel(1),
        channel(2),
        RationalTransferFunction::gain(1.0),
    ]
}

pub fn attitude_channels(
    params: &PlatformParams,
    gains: &ControllerGains,
    mode: Option<Mode>,
) -> [RationalTransferFunction; 4] {
    attitude_channels_with(params, gains, mode, &failsafe_torque(params, gains))
}

/// Analog Bessel command filter.
pub fn command_filter(cutoff_hz: f64, order: usize) -> RationalTransferFunction {
    let (num, den) = bessel::analog_prototype(order, 2.0 * PI * cutoff_hz);
    RationalTransferFunction::new(num, den).expect("Bessel denominator is nonzero")
}

/// Every linear model built from one parameter/gain snapshot.
#[derive(Debug, Clone)]
pub struct LinearModelSet {
    pub mode: Option<Mode>,
    pub relative_attitude: RationalTransferFunction,
    pub servo_controller: RationalTransferFunction,
    pub failsafe_torque: RationalTransferFunction,
    pub torque_to_attitude_nominal: [RationalTransferFunction; 3],
    /// Fail-safe roll (Mode 1) and pitch (Mode 2) torque-to-attitude models.
    pub torque_to_attitude_failsafe: [RationalTransferFunction; 2],
    pub attitude_channels: [RationalTransferFunction; 4],
    pub command_filter: RationalTransferFunction,
}

impl LinearModelSet {
    /// Uses the reference relative-attitude model.
    pub fn build(params: &PlatformParams, gains: &ControllerGains, mode: Option<Mode>) -> Self {
        Self::build_with(params, gains, mode, relative_attitude(params))
    }

    /// Uses a caller-provided relative-attitude model (for example
    /// [`relative_attitude_plant`]).
    pub fn build_with(
        params: &PlatformParams,
        gains: &ControllerGains,
        mode: Option<Mode>,
        id: RationalTransferFunction,
    ) -> Self {
        let sc = servo_controller(gains);
        let fs = failsafe_torque_with(&sc, &id);
        Self {
            mode,
            torque_to_attitude_nominal: [0, 1, 2].map(|a| torque_to_attitude_nominal(params, a)),
            torque_to_attitude_failsafe: [
                torque_to_attitude(params, 0, Some(Mode::One), &fs),
                torque_to_attitude(params, 1, Some(Mode::Two), &fs),
            ],
            attitude_channels: attitude_channels_with(params, gains, mode, &fs),
            command_filter: command_filter(gains.bessel_cutoff_hz, bessel::DEFAULT_ORDER),
            relative_attitude: id,
            servo_controller: sc,
            failsafe_torque: fs,
        }
    }

    /// `(name, model)` pairs for reports.
    pub fn named(&self) -> Vec<(String, &RationalTransferFunction)> {
        let mut v: Vec<(String, &RationalTransferFunction)> = vec![
            ("relative_attitude".into(), &self.relative_attitude),
            ("servo_controller".into(), &self.servo_controller),
            ("failsafe_torque".into(), &self.failsafe_torque),
        ];
        for (i, tf) in self.torque_to_attitude_nominal.iter().enumerate() {
            v.push((format!("torque_to_attitude_n{}", i + 1), tf));
        }
        for (i, tf) in self.torque_to_attitude_failsafe.iter().enumerate() {
            v.push((format!("torque_to_attitude_fs{}", i + 1), tf));
        }
        for (i, tf) in self.attitude_channels.iter().enumerate() {
            v.push((format!("channel{}", i + 1), tf));
        }
        v.push(("command_filter".into(), &self.command_filter));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(n: &[f64], d: &[f64]) -> RationalTransferFunction {
        RationalTransferFunction::from_coeffs(n, d).unwrap()
    }

    #[test]
    fn double_integrator_at_unit_frequency() {
        let g = tf(&[1.0], &[1.0, 0.0, 0.0]);
        let r = g.frequency_response(&[1.0]).unwrap();
        assert!(r[0].magnitude_db().unwrap().abs() < 1e-12);
        assert!((r[0].phase_deg().unwrap().abs() - 180.0).abs() < 1e-9);
        assert!(g.dc_gain().is_none());
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(
            RationalTransferFunction::from_coeffs(&[1.0], &[0.0]),
            Err(AnalysisError::ZeroDenominator)
        );
        assert_eq!(
            RationalTransferFunction::gain(2.0).poles(),
            Err(AnalysisError::NoPoles)
        );
        let g = tf(&[1.0], &[1.0, 1.0]);
        assert_eq!(
            g.frequency_response(&[2.0, 1.0]),
            Err(AnalysisError::BadGrid)
        );
        assert_eq!(
            g.frequency_response(&[0.0, 1.0]),
            Err(AnalysisError::BadGrid)
        );
    }

    #[test]
    fn pole_on_grid_is_flagged() {
        let g = tf(&[1.0], &[1.0, 0.0, 4.0]);
        let r = g.frequency_response(&[1.0, 2.0, 3.0]).unwrap();
        assert!(r[0].value.is_some());
        assert!(r[1].value.is_none());
    }

    #[test]
    fn unstable_pair() {
        let p = tf(&[1.0], &[1.0, 0.0, -9.0]).poles().unwrap();
        assert!(!p.stable);
        assert_eq!(p.rhp_count(), 1);
        assert!((p.max_real() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pid_tf_matches_direct_formula() {
        let g = PidGains::new(5.0, 0.1, 3.0);
        let wf = 2513.0;
        let c = pid_tf(&g, wf);
        for w in [0.3, 2.0, 40.0, 900.0] {
            let s = Complex::new(0.0, w);
            let direct = Complex::new(g.kp, 0.0) + g.ki / s + g.kd * s / (1.0 + s / wf);
            assert!((c.eval(s).unwrap() - direct).norm() < 1e-9 * direct.norm());
        }
        let pd = pid_tf(&PidGains::new(2.0, 0.0, 0.0), wf);
        assert_eq!(pd.den().degree(), 0);
    }

    #[test]
    fn step_response_first_order() {
        let g = tf(&[2.0], &[1.0, 2.0]);
        let r = g.step_response(2.0, 0.01);
        for (t, y) in r {
            assert!((y - (1.0 - (-2.0 * t).exp())).abs() < 1e-9);
        }
        let proper = tf(&[1.0, 3.0], &[1.0, 3.0]);
        assert!(proper
            .step_response(1.0, 0.1)
            .iter()
            .all(|(_, y)| (y - 1.0).abs() < 1e-9));
    }
}
