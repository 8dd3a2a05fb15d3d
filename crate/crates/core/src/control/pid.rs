/// Parallel-form PID gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd]
            .iter()
            .all(|g| g.is_finite() && *g >= 0.0)
    }
}

/// What the derivative term differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// `Kd d(error)/dt`; setpoint changes kick the output.
    Error,
    /// `-Kd d(measurement)/dt`; no setpoint kick.
    Measurement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    pub mode: DerivativeMode,
    /// Symmetric bound on the integral state, if any.
    pub integral_limit: Option<f64>,
    integral: f64,
    prev: Option<(f64, f64)>,
}

impl Pid {
    pub fn new(gains: PidGains, mode: DerivativeMode) -> Self {
        Self {
            gains,
            mode,
            integral_limit: None,
            integral: 0.0,
            prev: None,
        }
    }

    pub fn with_integral_limit(mut self, limit: f64) -> Self {
        self.integral_limit = Some(limit);
        self
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev = None;
    }

    /// One step with a finite-difference derivative. The first call after a
    /// reset has no derivative contribution. `hold_integral` freezes the
    /// integrator (anti-windup while the actuators are saturated).
    pub fn step(&mut self, error: f64, measurement: f64, dt: f64, hold_integral: bool) -> f64 {
        let derivative = match (self.prev, self.mode) {
            (Some((e0, _)), DerivativeMode::Error) => (error - e0) / dt,
            (Some((_, m0)), DerivativeMode::Measurement) => -(measurement - m0) / dt,
            (None, _) => 0.0,
        };
        self.prev = Some((error, measurement));
        self.finish(error, derivative, dt, hold_integral)
    }

    /// One step with an externally measured rate: `error_rate` for
    /// [`DerivativeMode::Error`], `measurement_rate` otherwise.
    pub fn step_with_rate(
        &mut self,
        error: f64,
        measurement: f64,
        error_rate: f64,
        measurement_rate: f64,
        dt: f64,
        hold_integral: bool,
    ) -> f64 {
        let derivative = match self.mode {
            DerivativeMode::Error => error_rate,
            DerivativeMode::Measurement => -measurement_rate,
        };
        self.prev = Some((error, measurement));
        self.finish(error, derivative, dt, hold_integral)
    }

    fn finish(&mut self, error: f64, derivative: f64, dt: f64, hold_integral: bool) -> f64 {
        if !hold_integral {
            self.integral += error * dt;
            if let Some(lim) = self.integral_limit {
                self.integral = self.integral.clamp(-lim, lim);
            }
        }
        self.gains.kp * error + self.gains.ki * self.integral + self.gains.kd * derivative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_history_gives_zero() {
        let mut p = Pid::new(PidGains::new(3.0, 0.5, 0.3), DerivativeMode::Measurement);
        for _ in 0..10 {
            assert_eq!(p.step(0.0, 0.0, 1e-3, false), 0.0);
        }
    }

    #[test]
    fn constant_error_proportional_only() {
        let mut p = Pid::new(PidGains::new(2.0, 0.0, 1.0), DerivativeMode::Measurement);
        for _ in 0..100 {
            assert!((p.step(0.25, 1.0, 1e-3, false) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn ramp_measurement_gives_kd_times_slope() {
        let (kd, m, dt) = (0.3, 2.0, 1e-3);
        let mut p = Pid::new(PidGains::new(0.0, 0.0, kd), DerivativeMode::Measurement);
        let mut out = 0.0;
        for k in 0..50 {
            let y = -m * k as f64 * dt;
            out = p.step(-y, y, dt, false);
        }
        assert!((out - kd * m).abs() < 1e-9);

        let mut p = Pid::new(PidGains::new(0.0, 0.0, kd), DerivativeMode::Error);
        for k in 0..50 {
            out = p.step(m * k as f64 * dt, 0.0, dt, false);
        }
        assert!((out - kd * m).abs() < 1e-9);
    }

    #[test]
    fn integral_hold_and_clamp() {
        let mut p = Pid::new(PidGains::new(0.0, 1.0, 0.0), DerivativeMode::Measurement)
            .with_integral_limit(0.5);
        for _ in 0..1000 {
            p.step(1.0, 0.0, 0.01, false);
        }
        assert_eq!(p.integral(), 0.5);
        p.reset();
        p.step(1.0, 0.0, 0.1, false);
        let before = p.integral();
        p.step(1.0, 0.0, 0.1, true);
        assert_eq!(p.integral(), before);
    }
}
