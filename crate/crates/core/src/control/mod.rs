//! Cascaded flight controller: position and height loops, attitude PIDs
//! with a fail-safe branch for the crippled axis, servo loops on the
//! relative attitude, and allocation.

pub mod bessel;
pub mod pid;

pub use bessel::{BesselFilter, FilterError};
pub use pid::{DerivativeMode, Pid, PidGains};

use crate::allocation::{
    demix_nominal, solve_failsafe, Allocation, AugmentedCommand, ControlWrench, FailsafeMode, Mode,
    Motor,
};
use crate::dynamics::{
    relative_attitude_from_cog, servo_hold_torques, ActuatorInputs, PlatformParams, PlatformState,
    Saturation,
};
use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Nominal roll/pitch attitude PID (output N m).
    pub attitude: PidGains,
    /// Roll/pitch PID used on the crippled axis in fail-safe flight.
    pub failsafe: PidGains,
    /// Servo PID on relative attitude (output N m).
    pub servo: PidGains,
    pub yaw: PidGains,
    /// Horizontal position PID (output m/s^2).
    pub position: PidGains,
    /// Height PID (output N, added to the hover thrust).
    pub height: PidGains,
    pub bessel_cutoff_hz: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::prototype()
    }
}

impl ControllerGains {
    pub fn prototype() -> Self {
        Self {
            attitude: PidGains::new(3.0, 0.5, 0.3),
            failsafe: PidGains::new(0.1, 0.1, 0.24),
            servo: PidGains::new(5.0, 0.1, 3.0),
            yaw: PidGains::new(0.3, 0.01, 0.06),
            position: PidGains::new(2.0, 0.5, 2.0),
            height: PidGains::new(10.0, 1.0, 1.0),
            bessel_cutoff_hz: 40.0,
        }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        for (name, g) in [
            ("attitude", self.attitude),
            ("failsafe", self.failsafe),
            ("servo", self.servo),
            ("yaw", self.yaw),
            ("position", self.position),
            ("height", self.height),
        ] {
            if !g.is_valid() {
                errs.push(format!("gains.{name} must be finite and non-negative"));
            }
        }
        if !(self.bessel_cutoff_hz > 0.0 && self.bessel_cutoff_hz.is_finite()) {
            errs.push("gains.bessel_cutoff must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Command shaping and limits not covered by the gain table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerLimits {
    /// Bound on commanded roll and pitch (rad).
    pub max_tilt: f64,
    /// Roll/pitch setpoint rate limit (rad/s).
    pub attitude_slew: f64,
    /// Yaw setpoint rate limit (rad/s).
    pub yaw_slew: f64,
    /// Bound on commanded yaw torque (N m).
    pub yaw_torque: f64,
    /// Natural frequency of the critically damped reference model that
    /// smooths relative-attitude commands (rad/s).
    pub alpha_bandwidth: f64,
    pub bessel_order: usize,
    /// Derivative mode of the fail-safe attitude PID. On error, its slow
    /// loop keeps up with the position cascade; on measurement it does not.
    pub failsafe_derivative: DerivativeMode,
}

impl Default for ControllerLimits {
    fn default() -> Self {
        Self {
            max_tilt: 0.3,
            attitude_slew: 1.0,
            yaw_slew: 0.5,
            yaw_torque: 0.1,
            alpha_bandwidth: 40.0,
            bessel_order: bessel::DEFAULT_ORDER,
            failsafe_derivative: DerivativeMode::Error,
        }
    }
}

/// Desired TP attitude and total thrust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeSetpoint {
    pub attitude: Vector3<f64>,
    pub thrust: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// Position (Earth frame, z down) and heading for the outer loop.
    Position {
        position: Vector3<f64>,
        yaw: f64,
    },
    Attitude(AttitudeSetpoint),
}

/// Idle biases of the fail-safe configuration for one failed motor, signed
/// for the CoG component that replaces it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimState {
    pub motor: Motor,
    /// CoG offset along the compensating axis (m), magnitude `l/2`.
    pub d_idle: f64,
    /// Small-angle relative attitude `l M / (2 m_F d_F)`, signed.
    pub alpha_idle: f64,
    /// Relative attitude that places the CoG exactly at `d_idle`.
    pub alpha_idle_exact: f64,
    /// Servo torque holding the idle attitude at hover, magnitude `M g l / 2`.
    pub tau_idle: f64,
    /// `+1` when positive relative attitude raises the compensating
    /// torque, `-1` otherwise.
    pub torque_sign: f64,
}

impl TrimState {
    pub fn for_motor(params: &PlatformParams, motor: Motor) -> Self {
        let half = params.arm / 2.0;
        // Signed CoG offset that cancels the torque of the opposite rotor
        // at half the hover thrust.
        let d_idle = match motor.index() {
            1 => -half,
            2 => half,
            3 => half,
            _ => -half,
        };
        let torque_sign = match motor.mode() {
            Mode::One => 1.0,
            Mode::Two => -1.0,
        };
        let ratio = params.mass() / (params.m_f * params.d_f);
        Self {
            motor,
            d_idle,
            alpha_idle: ratio * d_idle,
            alpha_idle_exact: (ratio * d_idle).clamp(-1.0, 1.0).asin(),
            tau_idle: params.hover_thrust() * d_idle,
            torque_sign,
        }
    }

    /// Trim for the motor-2 failure (Mode 1).
    pub fn mode1(params: &PlatformParams) -> Self {
        Self::for_motor(params, Motor::new(2).expect("valid motor"))
    }
}

/// Relative-attitude command from a desired compensating torque via the
/// small-angle map `alpha = alpha_idle + tau / (m_F d_F F_T / M)`. Returns
/// the command and whether it had to be clamped below `pi/2`.
pub fn failsafe_relative_attitude(
    params: &PlatformParams,
    trim: &TrimState,
    tau_d: f64,
    f_t: f64,
) -> (f64, bool) {
    let gain =
        params.m_f * params.d_f * f_t.max(crate::allocation::MIN_ALLOCATION_THRUST) / params.mass();
    let alpha = trim.alpha_idle + trim.torque_sign * tau_d / gain;
    clamp_relative(alpha)
}

/// Largest relative attitude the controller commands.
pub const MAX_RELATIVE_ATTITUDE: f64 = 1.4;

fn clamp_relative(alpha: f64) -> (f64, bool) {
    let c = alpha.clamp(-MAX_RELATIVE_ATTITUDE, MAX_RELATIVE_ATTITUDE);
    (c, c != alpha)
}

/// Servo loop on one relative-attitude axis. `sign` is `+1` for roll
/// (servo torque accelerates `alpha_r` positively) and `-1` for pitch. The
/// derivative acts on the tracking error, using the measured relative rate
/// and the rate of the reference-model command.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoLoop {
    pid: Pid,
    sign: f64,
}

impl ServoLoop {
    pub fn new(gains: PidGains, sign: f64) -> Self {
        Self {
            pid: Pid::new(gains, DerivativeMode::Error),
            sign,
        }
    }

    pub fn reset(&mut self) {
        self.pid.reset();
    }

    /// `bias + sign * PID(alpha_d - alpha)`.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        alpha_d: f64,
        alpha_d_rate: f64,
        alpha: f64,
        alpha_rate: f64,
        bias: f64,
        dt: f64,
        hold: bool,
    ) -> f64 {
        let e = alpha_d - alpha;
        bias + self.sign
            * self
                .pid
                .step_with_rate(e, alpha, alpha_d_rate - alpha_rate, alpha_rate, dt, hold)
    }
}

/// Servo torque command on the crippled axis: idle torque plus the servo
/// PID tracking `alpha_d`.
pub fn failsafe_roll_path(
    params: &PlatformParams,
    trim: &TrimState,
    servo: &mut ServoLoop,
    tau_d: f64,
    f_t: f64,
    alpha: f64,
    alpha_rate: f64,
    dt: f64,
) -> (f64, f64) {
    let (alpha_d, _) = failsafe_relative_attitude(params, trim, tau_d, f_t);
    let lim = params.servo_torque_limit;
    let tau = servo
        .update(alpha_d, 0.0, alpha, alpha_rate, trim.tau_idle, dt, false)
        .clamp(-lim, lim);
    (alpha_d, tau)
}

/// Horizontal position and height loops.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionController {
    x: Pid,
    y: Pid,
    height: Pid,
    tilt_clamped: bool,
}

impl PositionController {
    pub fn new(gains: &ControllerGains) -> Self {
        Self {
            x: Pid::new(gains.position, DerivativeMode::Measurement),
            y: Pid::new(gains.position, DerivativeMode::Measurement),
            height: Pid::new(gains.height, DerivativeMode::Measurement),
            tilt_clamped: false,
        }
    }

    /// Desired attitude (clamped to `max_tilt`) and thrust around `M g`.
    /// The horizontal integrators hold while the previous tilt was clamped.
    pub fn update(
        &mut self,
        params: &PlatformParams,
        limits: &ControllerLimits,
        target: &Vector3<f64>,
        yaw_d: f64,
        state: &PlatformState,
        dt: f64,
        hold: bool,
    ) -> AttitudeSetpoint {
        let e = target - state.x_t;
        let hold_xy = hold || self.tilt_clamped;
        let ax = self
            .x
            .step_with_rate(e.x, state.x_t.x, -state.v_t.x, state.v_t.x, dt, hold_xy);
        let ay = self
            .y
            .step_with_rate(e.y, state.x_t.y, -state.v_t.y, state.v_t.y, dt, hold_xy);
        // Height is -z.
        let eh = state.x_t.z - target.z;
        let dh = self
            .height
            .step_with_rate(eh, -state.x_t.z, state.v_t.z, -state.v_t.z, dt, hold);
        let (s, c) = state.q_t.z.sin_cos();
        let g = params.g;
        let pitch = (c * ax - s * ay) / g;
        let roll = -(s * ax + c * ay) / g;
        self.tilt_clamped = pitch.abs() > limits.max_tilt || roll.abs() > limits.max_tilt;
        AttitudeSetpoint {
            attitude: Vector3::new(
                roll.clamp(-limits.max_tilt, limits.max_tilt),
                pitch.clamp(-limits.max_tilt, limits.max_tilt),
                yaw_d,
            ),
            thrust: (params.hover_thrust() + dh).max(0.0),
        }
    }
}

/// Rate limiter on the attitude setpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointShaper {
    last: Option<Vector3<f64>>,
}

impl SetpointShaper {
    pub fn new() -> Self {
        Self { last: None }
    }

    pub fn shape(
        &mut self,
        limits: &ControllerLimits,
        target: &Vector3<f64>,
        dt: f64,
    ) -> Vector3<f64> {
        let out = match self.last {
            None => *target,
            Some(prev) => {
                let step = |p: f64, t: f64, rate: f64| p + (t - p).clamp(-rate * dt, rate * dt);
                Vector3::new(
                    step(prev.x, target.x, limits.attitude_slew),
                    step(prev.y, target.y, limits.attitude_slew),
                    step(prev.z, target.z, limits.yaw_slew),
                )
            }
        };
        self.last = Some(out);
        out
    }
}

impl Default for SetpointShaper {
    fn default() -> Self {
        Self::new()
    }
}

fn crippled_axis(mode: FailsafeMode) -> Option<usize> {
    mode.mode().map(|m| match m {
        Mode::One => 0,
        Mode::Two => 1,
    })
}

/// Attitude PIDs producing the desired wrench `u_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeController {
    nominal: [Pid; 2],
    yaw: Pid,
    failsafe: Pid,
    prefilter: BesselFilter,
    last_setpoint: Option<Vector3<f64>>,
    /// `J_T / (J_T + J_F)` per axis.
    tp_share: Vector3<f64>,
}

impl AttitudeController {
    pub fn new(
        params: &PlatformParams,
        gains: &ControllerGains,
        limits: &ControllerLimits,
        dt: f64,
    ) -> Result<Self, FilterError> {
        let nominal = Pid::new(gains.attitude, DerivativeMode::Measurement);
        Ok(Self {
            nominal: [nominal.clone(), nominal],
            yaw: Pid::new(gains.yaw, DerivativeMode::Measurement),
            failsafe: Pid::new(gains.failsafe, limits.failsafe_derivative),
            prefilter: BesselFilter::new(gains.bessel_cutoff_hz, limits.bessel_order, dt)?,
            last_setpoint: None,
            tp_share: params.j_t.component_div(&(params.j_t + params.j_f)),
        })
    }

    /// Clears the fail-safe branch before it takes over an axis.
    pub fn enter_failsafe(&mut self) {
        self.failsafe.reset();
        self.prefilter.reset(0.0);
    }

    pub fn update(
        &mut self,
        limits: &ControllerLimits,
        mode: FailsafeMode,
        sp: &AttitudeSetpoint,
        state: &PlatformState,
        dt: f64,
        hold: bool,
    ) -> ControlWrench {
        let crippled = crippled_axis(mode);
        // The shaped setpoint is rate limited, so its difference is bounded.
        let sp_rate = self
            .last_setpoint
            .map_or(Vector3::zeros(), |prev| (sp.attitude - prev) / dt);
        self.last_setpoint = Some(sp.attitude);
        let mut torque = Vector3::zeros();
        for axis in 0..2 {
            let e = sp.attitude[axis] - state.q_t[axis];
            let (q, w) = (state.q_t[axis], state.w_t[axis]);
            torque[axis] = if crippled == Some(axis) {
                // Damp on the inertia-weighted rate of both parts: servo
                // reaction moves the TP alone and, on the pitch axis, against
                // the torque being built up.
                let k = self.tp_share[axis];
                let w = k * w + (1.0 - k) * state.w_f[axis];
                let raw = self
                    .failsafe
                    .step_with_rate(e, q, sp_rate[axis] - w, w, dt, hold);
                self.prefilter.filter(raw)
            } else {
                self.nominal[axis].step_with_rate(e, q, -w, w, dt, hold)
            };
        }
        let ey = sp.attitude.z - state.q_t.z;
        let ty = self
            .yaw
            .step_with_rate(ey, state.q_t.z, -state.w_t.z, state.w_t.z, dt, hold);
        torque.z = ty.clamp(-limits.yaw_torque, limits.yaw_torque);
        ControlWrench {
            torque,
            thrust: sp.thrust,
        }
    }
}

/// Everything the controller decided on one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Shaped attitude setpoint actually tracked.
    pub setpoint: AttitudeSetpoint,
    pub u_d: ControlWrench,
    pub allocation: Allocation,
    /// Commanded relative attitudes `[alpha_r, alpha_p]`.
    pub alpha_d: [f64; 2],
    /// Thrusts and servo torques after saturation.
    pub inputs: ActuatorInputs,
    pub saturation: Saturation,
    /// The commanded CoG offset needed a relative attitude beyond the limit.
    pub cog_clamped: bool,
}

/// The complete cascade, ticked at a fixed rate.
#[derive(Debug, Clone)]
pub struct FlightController {
    params: PlatformParams,
    gains: ControllerGains,
    limits: ControllerLimits,
    dt: f64,
    mode: FailsafeMode,
    trim: Option<TrimState>,
    position: PositionController,
    shaper: SetpointShaper,
    attitude: AttitudeController,
    servo: [ServoLoop; 2],
    /// Reference-model state `(alpha_d, alpha_d_rate)` per axis.
    alpha_ref: Option<[(f64, f64); 2]>,
    saturated: bool,
}

impl FlightController {
    pub fn new(
        params: PlatformParams,
        gains: ControllerGains,
        limits: ControllerLimits,
        dt: f64,
    ) -> Result<Self, FilterError> {
        Ok(Self {
            position: PositionController::new(&gains),
            attitude: AttitudeController::new(&params, &gains, &limits, dt)?,
            servo: [
                ServoLoop::new(gains.servo, 1.0),
                ServoLoop::new(gains.servo, -1.0),
            ],
            shaper: SetpointShaper::new(),
            params,
            gains,
            limits,
            dt,
            mode: FailsafeMode::NOMINAL,
            trim: None,
            alpha_ref: None,
            saturated: false,
        })
    }

    pub fn mode(&self) -> FailsafeMode {
        self.mode
    }

    pub fn trim(&self) -> Option<&TrimState> {
        self.trim.as_ref()
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    /// Switches to fail-safe flight for `motor`. Later calls are ignored.
    pub fn enter_failsafe(&mut self, motor: Motor) {
        if self.mode.faulty.is_some() {
            return;
        }
        self.mode = FailsafeMode::failed(motor);
        self.trim = Some(TrimState::for_motor(&self.params, motor));
        self.attitude.enter_failsafe();
    }

    pub fn tick(&mut self, reference: &Reference, state: &PlatformState) -> ControlOutput {
        let (p, dt, hold) = (self.params, self.dt, self.saturated);
        let target = match reference {
            Reference::Position { position, yaw } => {
                self.position
                    .update(&p, &self.limits, position, *yaw, state, dt, hold)
            }
            Reference::Attitude(sp) => *sp,
        };
        let setpoint = AttitudeSetpoint {
            attitude: self.shaper.shape(&self.limits, &target.attitude, dt),
            thrust: target.thrust,
        };
        let u_d = self
            .attitude
            .update(&self.limits, self.mode, &setpoint, state, dt, hold);

        let (allocation, alpha_target, cog_clamped) = match self.mode.faulty {
            None => (demix_nominal(&p, &u_d), [0.0, 0.0], false),
            Some(motor) => self.failsafe_allocation(motor, &u_d),
        };
        let w = self.limits.alpha_bandwidth;
        let reference = match self.alpha_ref {
            None => alpha_target.map(|a| (a, 0.0)),
            Some(prev) => [0, 1].map(|i| {
                let (a, v) = prev[i];
                let v = v + dt * (w * w * (alpha_target[i] - a) - 2.0 * w * v);
                (a + dt * v, v)
            }),
        };
        self.alpha_ref = Some(reference);
        let alpha_d = reference.map(|r| r.0);

        let thrusts = allocation.command.thrusts;
        let (hold_r, hold_p) = servo_hold_torques(&p, state, &thrusts);
        let alpha = [state.alpha_r(), state.alpha_p()];
        let alpha_rate = [state.alpha_r_rate(), state.alpha_p_rate()];
        let mut servo = [0.0; 2];
        // The hold torque equals the idle bias at fail-safe trim and follows
        // thrust changes away from it.
        for (axis, bias) in [hold_r, hold_p].into_iter().enumerate() {
            let (ad, vd) = reference[axis];
            servo[axis] =
                self.servo[axis].update(ad, vd, alpha[axis], alpha_rate[axis], bias, dt, hold);
        }
        let (inputs, saturation) = ActuatorInputs {
            thrusts,
            tau_rs: servo[0],
            tau_ps: servo[1],
        }
        .clamped(&p);
        self.saturated =
            allocation.saturated || saturation.thrust || saturation.servo || cog_clamped;
        ControlOutput {
            setpoint,
            u_d,
            allocation,
            alpha_d,
            inputs,
            saturation,
            cog_clamped,
        }
    }

    fn failsafe_allocation(
        &self,
        motor: Motor,
        u_d: &ControlWrench,
    ) -> (Allocation, [f64; 2], bool) {
        let p = &self.params;
        match solve_failsafe(p, motor, u_d, u_d.thrust) {
            Ok(alloc) => {
                let limit = p.max_cog_offset() * MAX_RELATIVE_ATTITUDE.sin();
                let [d1, d2] = alloc.raw.cog;
                let (d1c, d2c) = (d1.clamp(-limit, limit), d2.clamp(-limit, limit));
                let clamped = d1c != d1 || d2c != d2;
                let (ar, ap) = relative_attitude_from_cog(p, d1c, d2c).unwrap_or((0.0, 0.0));
                let mut alloc = alloc;
                alloc.command.cog = [d1c, d2c];
                (alloc, [ar, ap], clamped)
            }
            Err(_) => {
                let zero = AugmentedCommand {
                    thrusts: [0.0; 4],
                    cog: [0.0; 2],
                };
                let alpha = self.trim.map_or(0.0, |t| t.alpha_idle_exact);
                let alpha_d = match motor.mode() {
                    Mode::One => [alpha, 0.0],
                    Mode::Two => [0.0, alpha],
                };
                (
                    Allocation {
                        raw: zero,
                        command: zero,
                        saturated: true,
                    },
                    alpha_d,
                    false,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_state() -> PlatformState {
        PlatformState::at_rest(Vector3::new(0.0, 0.0, -1.0), 0.0)
    }

    #[test]
    fn trim_values() {
        let p = PlatformParams::prototype();
        let t = TrimState::mode1(&p);
        assert_eq!(t.d_idle, 0.075);
        assert!((t.tau_idle - 0.5 * p.hover_thrust() * p.arm).abs() < 1e-12);
        assert!((t.alpha_idle - 0.508).abs() < 1e-3);
        assert!((t.alpha_idle_exact - 0.533).abs() < 1e-3);
        let m1 = TrimState::for_motor(&p, Motor::new(1).unwrap());
        assert!(m1.d_idle < 0.0 && m1.tau_idle < 0.0 && m1.torque_sign == -1.0);
    }

    #[test]
    fn eq25_examples() {
        let p = PlatformParams::prototype();
        let t = TrimState::mode1(&p);
        let (a0, c) = failsafe_relative_attitude(&p, &t, 0.0, p.hover_thrust());
        assert!(!c && (a0 - t.alpha_idle).abs() < 1e-15);
        let (a1, _) = failsafe_relative_attitude(&p, &t, 0.1, p.hover_thrust());
        assert!((a1 - a0 - 0.1 / (p.m_f * p.d_f * p.g)).abs() < 1e-12);
        assert!((a1 - a0 - 0.0527).abs() < 1e-4);
    }

    #[test]
    fn position_controller_trim_and_height_step() {
        let p = PlatformParams::prototype();
        let g = ControllerGains::prototype();
        let l = ControllerLimits::default();
        let mut pc = PositionController::new(&g);
        let s = hover_state();
        let sp = pc.update(&p, &l, &s.x_t, 0.3, &s, 1e-3, false);
        assert_eq!(sp.attitude, Vector3::new(0.0, 0.0, 0.3));
        assert_eq!(sp.thrust, p.hover_thrust());

        let mut pc = PositionController::new(&g);
        let up = Vector3::new(0.0, 0.0, -2.0);
        let sp = pc.update(&p, &l, &up, 0.0, &s, 1e-3, false);
        // Kp * 1 m plus one integration step of Ki.
        assert!((sp.thrust - (p.hover_thrust() + 10.0 + 1e-3)).abs() < 1e-12);

        let mut pc = PositionController::new(&g);
        let far = Vector3::new(50.0, -50.0, -1.0);
        let sp = pc.update(&p, &l, &far, 0.0, &s, 1e-3, false);
        assert!(sp.attitude.x.abs() <= 0.3 && sp.attitude.y.abs() <= 0.3);
    }

    #[test]
    fn attitude_controller_examples() {
        let p = PlatformParams::prototype();
        let g = ControllerGains::prototype();
        let l = ControllerLimits::default();
        let s = hover_state();
        let mut ac = AttitudeController::new(&PlatformParams::prototype(), &g, &l, 1e-3).unwrap();
        let sp = AttitudeSetpoint {
            attitude: Vector3::zeros(),
            thrust: p.hover_thrust(),
        };
        let u = ac.update(&l, FailsafeMode::NOMINAL, &sp, &s, 1e-3, true);
        assert_eq!(u.torque, Vector3::zeros());
        assert_eq!(u.thrust, p.hover_thrust());

        let sp = AttitudeSetpoint {
            attitude: Vector3::new(0.1, 0.0, 0.0),
            thrust: p.hover_thrust(),
        };
        let u = ac.update(&l, FailsafeMode::NOMINAL, &sp, &s, 1e-3, true);
        assert!((u.torque.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn mode_isolation() {
        let p = PlatformParams::prototype();
        let g = ControllerGains::prototype();
        let l = ControllerLimits::default();
        let mut a = AttitudeController::new(&PlatformParams::prototype(), &g, &l, 1e-3).unwrap();
        let mut b = a.clone();
        b.enter_failsafe();
        let mode1 = FailsafeMode::failed(Motor::new(2).unwrap());
        let mut s = hover_state();
        for k in 0..500 {
            let t = k as f64 * 1e-3;
            s.q_t = Vector3::new(0.05 * t.sin(), 0.03 * (2.0 * t).cos(), 0.1 * t);
            s.w_t = Vector3::new(0.05 * t.cos(), -0.06 * (2.0 * t).sin(), 0.1);
            let sp = AttitudeSetpoint {
                attitude: Vector3::new(0.02, -0.01, 0.2),
                thrust: p.hover_thrust() + t,
            };
            let ua = a.update(&l, FailsafeMode::NOMINAL, &sp, &s, 1e-3, false);
            let ub = b.update(&l, mode1, &sp, &s, 1e-3, false);
            assert_eq!(ua.torque.y.to_bits(), ub.torque.y.to_bits());
            assert_eq!(ua.torque.z.to_bits(), ub.torque.z.to_bits());
            assert_eq!(ua.thrust.to_bits(), ub.thrust.to_bits());
        }
    }

    #[test]
    fn failsafe_gains_on_crippled_axis() {
        let p = PlatformParams::prototype();
        let g = ControllerGains::prototype();
        let l = ControllerLimits {
            bessel_order: 1,
            ..ControllerLimits::default()
        };
        let mut ac = AttitudeController::new(&PlatformParams::prototype(), &g, &l, 1e-3).unwrap();
        ac.enter_failsafe();
        let s = hover_state();
        let sp = AttitudeSetpoint {
            attitude: Vector3::new(0.1, 0.1, 0.0),
            thrust: p.hover_thrust(),
        };
        let mode1 = FailsafeMode::failed(Motor::new(2).unwrap());
        let mut u = ac.update(&l, mode1, &sp, &s, 1e-3, true);
        assert!((u.torque.y - 0.3).abs() < 1e-12);
        for _ in 0..2000 {
            u = ac.update(&l, mode1, &sp, &s, 1e-3, true);
        }
        // Prefiltered fail-safe proportional term Kp = 0.1.
        assert!((u.torque.x - 0.01).abs() < 1e-9);
    }

    #[test]
    fn nominal_hover_tick() {
        let p = PlatformParams::prototype();
        let mut fc = FlightController::new(
            p,
            ControllerGains::prototype(),
            ControllerLimits::default(),
            1e-3,
        )
        .unwrap();
        let s = hover_state();
        let out = fc.tick(
            &Reference::Position {
                position: s.x_t,
                yaw: 0.0,
            },
            &s,
        );
        for f in out.inputs.thrusts {
            assert!((f - p.hover_thrust() / 4.0).abs() < 1e-12);
        }
        assert!(out.inputs.tau_rs.abs() < 1e-12);
        assert!(!out.saturation.thrust && !out.saturation.servo);
    }

    #[test]
    fn mode1_trim_tick() {
        let p = PlatformParams::prototype();
        let mut fc = FlightController::new(
            p,
            ControllerGains::prototype(),
            ControllerLimits::default(),
            1e-3,
        )
        .unwrap();
        fc.enter_failsafe(Motor::new(2).unwrap());
        let trim = *fc.trim().unwrap();
        let mut s = hover_state();
        s.q_f.x = -trim.alpha_idle_exact;
        let out = fc.tick(
            &Reference::Attitude(AttitudeSetpoint {
                attitude: Vector3::zeros(),
                thrust: p.hover_thrust(),
            }),
            &s,
        );
        let f = out.inputs.thrusts;
        assert_eq!(f[1], 0.0);
        assert!((f[3] - p.hover_thrust() / 2.0).abs() < 1e-9);
        assert!((out.alpha_d[0] - trim.alpha_idle_exact).abs() < 1e-9);
        assert!((out.inputs.tau_rs - trim.tau_idle).abs() < 1e-9);
    }
}
