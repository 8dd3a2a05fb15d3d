//! Two-body equations of motion of the T3 platform.
//!
//! The thruster part (TP) carries the four rotors, the fuselage part (FP)
//! hangs from the cross member (CM) and is tilted relative to the TP by two
//! servos. Translation is driven by the TP attitude and total thrust only;
//! the rotational EoMs of both bodies are coupled through the CM
//! interaction torques.
//!
//! Elementary rotations follow the frame-rotation (passive) convention, so
//! `rot_roll(a)` maps a vector expressed in a frame rolled by `a` back into
//! the parent frame with a `+sin` in the (1,2) slot. With that convention
//! the translational model, the FP gravity torque, the CoG offset and its
//! inverse are mutually consistent.

use nalgebra::{Matrix3, SVector, Vector3};
use std::f64::consts::FRAC_PI_2;

/// Physical constants of the platform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformParams {
    /// Thruster part mass (kg).
    pub m_t: f64,
    /// Fuselage part mass (kg).
    pub m_f: f64,
    /// TP origin to CM distance (m).
    pub d_t: f64,
    /// FP origin to CM distance (m).
    pub d_f: f64,
    /// Arm length (m).
    pub arm: f64,
    /// Rotor torque/force coefficient ratio b/k (m).
    pub torque_coeff_ratio: f64,
    /// TP principal inertias (kg m^2).
    pub j_t: Vector3<f64>,
    /// FP principal inertias (kg m^2).
    pub j_f: Vector3<f64>,
    /// Gravitational acceleration, positive down (m/s^2).
    pub g: f64,
    /// Per-motor thrust limit (N).
    pub f_max: f64,
    /// Symmetric servo torque saturation (N m).
    pub servo_torque_limit: f64,
}

impl Default for PlatformParams {
    fn default() -> Self {
        Self::prototype()
    }
}

impl PlatformParams {
    /// The experimental platform's parameters.
    pub fn prototype() -> Self {
        Self {
            m_t: 0.389,
            m_f: 0.921,
            d_t: 0.02,
            d_f: 0.21,
            arm: 0.15,
            torque_coeff_ratio: 0.05,
            j_t: Vector3::new(0.002, 0.002, 0.01),
            j_f: Vector3::new(0.014, 0.014, 0.04),
            g: 9.81,
            f_max: 12.9,
            servo_torque_limit: 3.0,
        }
    }

    /// Total mass `m_T + m_F`.
    pub fn mass(&self) -> f64 {
        self.m_t + self.m_f
    }

    /// Hover thrust `M g`.
    pub fn hover_thrust(&self) -> f64 {
        self.mass() * self.g
    }

    /// Largest reachable in-plane CoG offset, `m_F d_F / M`.
    pub fn max_cog_offset(&self) -> f64 {
        self.m_f * self.d_f / self.mass()
    }

    /// Combined inertia `J_T + J_F`.
    pub fn j_total(&self) -> Vector3<f64> {
        self.j_t + self.j_f
    }

    /// Checks every invariant and returns the full list of violations.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let positive = [
            ("m_T", self.m_t),
            ("m_F", self.m_f),
            ("d_T", self.d_t),
            ("d_F", self.d_f),
            ("l", self.arm),
            ("b/k", self.torque_coeff_ratio),
            ("J_T.x", self.j_t.x),
            ("J_T.y", self.j_t.y),
            ("J_T.z", self.j_t.z),
            ("J_F.x", self.j_f.x),
            ("J_F.y", self.j_f.y),
            ("J_F.z", self.j_f.z),
            ("g", self.g),
            ("F_max", self.f_max),
            ("servo_torque_limit", self.servo_torque_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be finite and > 0 (got {v})"));
            }
        }
        if errs.is_empty() && self.f_max < self.hover_thrust() / 2.0 {
            errs.push(format!(
                "F_max = {} is below M g / 2 = {}; fail-safe hover is infeasible",
                self.f_max,
                self.hover_thrust() / 2.0
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("requested CoG offset ({d1:.4}, {d2:.4}) m is outside the reachable disc of radius {limit:.4} m")]
    UnreachableCog { d1: f64, d2: f64, limit: f64 },
    #[error("time step must be positive (got {0})")]
    BadTimeStep(f64),
}

/// Full rigid-body state of both parts (18 scalars).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlatformState {
    /// TP position, Earth frame, z down (m).
    pub x_t: Vector3<f64>,
    /// TP velocity (m/s).
    pub v_t: Vector3<f64>,
    /// TP roll-pitch-yaw (rad).
    pub q_t: Vector3<f64>,
    /// TP attitude rates (rad/s).
    pub w_t: Vector3<f64>,
    /// FP roll-pitch-yaw (rad).
    pub q_f: Vector3<f64>,
    /// FP attitude rates (rad/s).
    pub w_f: Vector3<f64>,
}

impl PlatformState {
    /// State at rest at `position` with both bodies level and the given yaw.
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        let q = Vector3::new(0.0, 0.0, yaw);
        Self {
            x_t: position,
            q_t: q,
            q_f: q,
            ..Default::default()
        }
    }

    /// Relative roll `q1_T - q1_F`.
    pub fn alpha_r(&self) -> f64 {
        self.q_t.x - self.q_f.x
    }

    /// Relative pitch `q2_T - q2_F`.
    pub fn alpha_p(&self) -> f64 {
        self.q_t.y - self.q_f.y
    }

    pub fn alpha_r_rate(&self) -> f64 {
        self.w_t.x - self.w_f.x
    }

    pub fn alpha_p_rate(&self) -> f64 {
        self.w_t.y - self.w_f.y
    }

    pub fn check(&self) -> Result<(), DynamicsError> {
        let all = [self.x_t, self.v_t, self.q_t, self.w_t, self.q_f, self.w_f];
        if all.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(DynamicsError::InvalidState(
                "non-finite state component".into(),
            ));
        }
        if self.q_t.y.abs() >= FRAC_PI_2 || self.q_f.y.abs() >= FRAC_PI_2 {
            return Err(DynamicsError::InvalidState(format!(
                "pitch at Euler singularity (q2_T = {:.4}, q2_F = {:.4})",
                self.q_t.y, self.q_f.y
            )));
        }
        Ok(())
    }

    fn to_vector(self) -> SVector<f64, 18> {
        let mut v = SVector::<f64, 18>::zeros();
        for (i, part) in [self.x_t, self.v_t, self.q_t, self.w_t, self.q_f, self.w_f]
            .iter()
            .enumerate()
        {
            v.fixed_rows_mut::<3>(3 * i).copy_from(part);
        }
        v
    }

    fn from_vector(v: &SVector<f64, 18>) -> Self {
        let part = |i: usize| -> Vector3<f64> { v.fixed_rows::<3>(3 * i).into_owned() };
        Self {
            x_t: part(0),
            v_t: part(1),
            q_t: part(2),
            w_t: part(3),
            q_f: part(4),
            w_f: part(5),
        }
    }
}

/// Plant inputs: four rotor thrusts and the two CM servo torques.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorInputs {
    pub thrusts: [f64; 4],
    /// Servo torque on the CM roll axis (N m).
    pub tau_rs: f64,
    /// Servo torque on the CM pitch axis (N m).
    pub tau_ps: f64,
}

/// Which actuator limits were hit when clamping inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Saturation {
    pub thrust: bool,
    pub servo: bool,
}

impl ActuatorInputs {
    pub fn total_thrust(&self) -> f64 {
        self.thrusts.iter().sum()
    }

    /// Clamps thrusts to `[0, F_max]` and servo torques to the configured
    /// saturation. Non-finite requests clamp to zero.
    pub fn clamped(&self, params: &PlatformParams) -> (Self, Saturation) {
        let mut sat = Saturation::default();
        let mut out = *self;
        for f in out.thrusts.iter_mut() {
            let c = if f.is_finite() {
                f.clamp(0.0, params.f_max)
            } else {
                0.0
            };
            if c != *f {
                sat.thrust = true;
            }
            *f = c;
        }
        let lim = params.servo_torque_limit;
        for t in [&mut out.tau_rs, &mut out.tau_ps] {
            let c = if t.is_finite() {
                t.clamp(-lim, lim)
            } else {
                0.0
            };
            if c != *t {
                sat.servo = true;
            }
            *t = c;
        }
        (out, sat)
    }
}

/// Torques the CM exerts on each part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionTorques {
    /// CM -> TP, TP body frame.
    pub t_ct: Vector3<f64>,
    /// CM -> FP, FP body frame.
    pub t_cf: Vector3<f64>,
}

impl InteractionTorques {
    /// Idle-attitude interaction model, used for every relative attitude.
    pub fn idle(params: &PlatformParams, tau_rs: f64, tau_ps: f64, tau_yaw_thrusters: f64) -> Self {
        let yaw = -params.j_f.z / (params.j_t.z + params.j_f.z) * tau_yaw_thrusters;
        let t_ct = Vector3::new(tau_rs, -tau_ps, yaw);
        Self { t_ct, t_cf: -t_ct }
    }
}

pub fn rot_roll(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c)
}

pub fn rot_pitch(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

pub fn rot_yaw(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-Earth rotation `R_y(q3) R_p(q2) R_r(q1)`.
pub fn rotation(q: &Vector3<f64>) -> Matrix3<f64> {
    rot_yaw(q.z) * rot_pitch(q.y) * rot_roll(q.x)
}

/// Thruster torques `T_T` from the four rotor thrusts.
pub fn thruster_torques(params: &PlatformParams, f: &[f64; 4]) -> Vector3<f64> {
    let l = params.arm;
    let bk = params.torque_coeff_ratio;
    Vector3::new(
        l * (f[1] - f[3]),
        l * (f[0] - f[2]),
        bk * (f[0] - f[1] + f[2] - f[3]),
    )
}

/// TP (and FP) translational acceleration for total thrust `f_t`.
pub fn translational_accel(
    params: &PlatformParams,
    q_t: &Vector3<f64>,
    f_t: f64,
) -> Result<Vector3<f64>, DynamicsError> {
    if q_t.iter().any(|c| !c.is_finite()) || !f_t.is_finite() {
        return Err(DynamicsError::InvalidState(
            "non-finite attitude or thrust".into(),
        ));
    }
    let thrust = Vector3::new(0.0, 0.0, -f_t);
    Ok(rotation(q_t) * thrust / params.mass() + Vector3::new(0.0, 0.0, params.g))
}

/// Gravity-like torque the thrust exerts on the FP through the CM, for total
/// thrust `f_t` and relative attitudes `(alpha_r, alpha_p)`.
pub fn fuselage_thrust_torque(
    params: &PlatformParams,
    alpha_r: f64,
    alpha_p: f64,
    f_t: f64,
) -> Vector3<f64> {
    let d_f = Vector3::new(0.0, 0.0, params.d_f);
    let thrust = Vector3::new(0.0, 0.0, -f_t);
    (params.m_f / params.mass()) * d_f.cross(&(rot_roll(alpha_r) * rot_pitch(-alpha_p) * thrust))
}

/// Angular accelerations `(q''_T, q''_F)` for the given state and inputs.
pub fn rotational_accel(
    params: &PlatformParams,
    state: &PlatformState,
    inputs: &ActuatorInputs,
) -> Result<(Vector3<f64>, Vector3<f64>), DynamicsError> {
    state.check()?;
    let t_t = thruster_torques(params, &inputs.thrusts);
    let inter = InteractionTorques::idle(params, inputs.tau_rs, inputs.tau_ps, t_t.z);
    let g_f = fuselage_thrust_torque(
        params,
        state.alpha_r(),
        state.alpha_p(),
        inputs.total_thrust(),
    );
    let qdd_t = (t_t + inter.t_ct).component_div(&params.j_t);
    let qdd_f = (g_f + inter.t_cf).component_div(&params.j_f);
    Ok((qdd_t, qdd_f))
}

/// Servo torques that keep both relative attitudes unaccelerated for the
/// given thrusts. At `alpha = 0` this reduces the platform to a single
/// rigid body with inertia `J_T + J_F`.
pub fn servo_hold_torques(
    params: &PlatformParams,
    state: &PlatformState,
    thrusts: &[f64; 4],
) -> (f64, f64) {
    let t_t = thruster_torques(params, thrusts);
    let f_t: f64 = thrusts.iter().sum();
    let g_f = fuselage_thrust_torque(params, state.alpha_r(), state.alpha_p(), f_t);
    let (jt, jf) = (params.j_t, params.j_f);
    let tau_rs = (jt.x * g_f.x - jf.x * t_t.x) / (jt.x + jf.x);
    let tau_ps = (jf.y * t_t.y - jt.y * g_f.y) / (jt.y + jf.y);
    (tau_rs, tau_ps)
}

/// CoG position in the TP frame for relative attitudes `(alpha_r, alpha_p)`.
pub fn cog_offset(params: &PlatformParams, alpha_r: f64, alpha_p: f64) -> Vector3<f64> {
    let d_t = Vector3::new(0.0, 0.0, params.d_t);
    let d_f = Vector3::new(0.0, 0.0, params.d_f);
    (params.m_f / params.mass()) * (d_t + rot_roll(-alpha_r) * rot_pitch(alpha_p) * (-d_f))
}

/// Inverse of [`cog_offset`] restricted to the in-plane components.
pub fn relative_attitude_from_cog(
    params: &PlatformParams,
    d1: f64,
    d2: f64,
) -> Result<(f64, f64), DynamicsError> {
    let scale = params.mass() / (params.m_f * params.d_f);
    let unreachable = || DynamicsError::UnreachableCog {
        d1,
        d2,
        limit: params.max_cog_offset(),
    };
    let sp = scale * d1;
    if !(-1.0..=1.0).contains(&sp) {
        return Err(unreachable());
    }
    let alpha_p = sp.asin();
    let sr = scale * d2 / alpha_p.cos();
    if !(-1.0..=1.0).contains(&sr) {
        return Err(unreachable());
    }
    Ok((sr.asin(), alpha_p))
}

fn derivative(
    params: &PlatformParams,
    s: &PlatformState,
    inputs: &ActuatorInputs,
) -> Result<SVector<f64, 18>, DynamicsError> {
    let acc = translational_accel(params, &s.q_t, inputs.total_thrust())?;
    let (qdd_t, qdd_f) = rotational_accel(params, s, inputs)?;
    let d = PlatformState {
        x_t: s.v_t,
        v_t: acc,
        q_t: s.w_t,
        w_t: qdd_t,
        q_f: s.w_f,
        w_f: qdd_f,
    };
    Ok(d.to_vector())
}

/// One classical RK4 step with inputs held over `dt`.
pub fn step(
    params: &PlatformParams,
    state: &PlatformState,
    inputs: &ActuatorInputs,
    dt: f64,
) -> Result<PlatformState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    let y = state.to_vector();
    let at = |v: SVector<f64, 18>| PlatformState::from_vector(&v);
    let k1 = derivative(params, state, inputs)?;
    let k2 = derivative(params, &at(y + k1 * (dt / 2.0)), inputs)?;
    let k3 = derivative(params, &at(y + k2 * (dt / 2.0)), inputs)?;
    let k4 = derivative(params, &at(y + k3 * dt), inputs)?;
    let next = at(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0));
    next.check()?;
    Ok(next)
}
