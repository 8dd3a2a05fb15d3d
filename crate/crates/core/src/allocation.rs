//! Mixing matrices: nominal quadrotor mixing, the CoG-augmented map and the
//! single/dual-failure reductions of it.

use crate::dynamics::PlatformParams;
use nalgebra::{Matrix4, SMatrix, Vector3, Vector4};
use std::fmt;

pub type Matrix4x6 = SMatrix<f64, 4, 6>;
pub type Matrix6x4 = SMatrix<f64, 6, 4>;

/// Thresholds below this count as "no thrust" for CoG-based allocation.
pub const MIN_ALLOCATION_THRUST: f64 = 1e-6;
/// Relative singular-value threshold for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("motor index {0} is not in 1..=4")]
    InvalidMotor(u8),
    #[error("allocation singular: total thrust {0} N leaves the CoG columns empty")]
    Singular(f64),
    #[error("dual failure needs two distinct motors (got {0} twice)")]
    SameMotor(Motor),
    #[error("CoG offset {d:.4} m exceeds the reachable {limit:.4} m")]
    UnreachableCog { d: f64, limit: f64 },
}

/// Rotor index 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Motor(u8);

impl Motor {
    pub const ALL: [Motor; 4] = [Motor(1), Motor(2), Motor(3), Motor(4)];

    pub fn new(index: u8) -> Result<Self, AllocationError> {
        if (1..=4).contains(&index) {
            Ok(Self(index))
        } else {
            Err(AllocationError::InvalidMotor(index))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Zero-based column in `c0`.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    /// The fail-safe mode this failure triggers.
    pub fn mode(self) -> Mode {
        match self.0 {
            2 | 4 => Mode::One,
            _ => Mode::Two,
        }
    }
}

impl fmt::Display for Motor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "motor {}", self.0)
    }
}

/// Mode 1 recovers roll with `d2`; Mode 2 recovers pitch with `d1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub fn number(self) -> u8 {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
        }
    }
}

/// Allocation configuration: healthy, or one motor lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailsafeMode {
    pub faulty: Option<Motor>,
}

impl FailsafeMode {
    pub const NOMINAL: Self = Self { faulty: None };

    pub fn failed(motor: Motor) -> Self {
        Self {
            faulty: Some(motor),
        }
    }

    pub fn mode(&self) -> Option<Mode> {
        self.faulty.map(Motor::mode)
    }
}

/// `u = [T_O; F_T]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlWrench {
    pub torque: Vector3<f64>,
    pub thrust: f64,
}

impl ControlWrench {
    pub fn new(roll: f64, pitch: f64, yaw: f64, thrust: f64) -> Self {
        Self {
            torque: Vector3::new(roll, pitch, yaw),
            thrust,
        }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.torque.x, self.torque.y, self.torque.z, self.thrust)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// `c_aug = [F1..F4, d1, d2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentedCommand {
    pub thrusts: [f64; 4],
    pub cog: [f64; 2],
}

impl AugmentedCommand {
    pub fn as_vector(&self) -> SMatrix<f64, 6, 1> {
        let f = self.thrusts;
        SMatrix::<f64, 6, 1>::from_column_slice(&[f[0], f[1], f[2], f[3], self.cog[0], self.cog[1]])
    }
}

/// Allocation result with the saturation outcome of clipping to `[0, F_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    /// Exact (unclipped) solution.
    pub raw: AugmentedCommand,
    /// Thrusts clipped to the motor limits.
    pub command: AugmentedCommand,
    pub saturated: bool,
}

pub fn nominal_matrix(params: &PlatformParams) -> Matrix4<f64> {
    let l = params.arm;
    let bk = params.torque_coeff_ratio;
    Matrix4::new(
        0.0, l, 0.0, -l, //
        l, 0.0, -l, 0.0, //
        bk, -bk, bk, -bk, //
        1.0, 1.0, 1.0, 1.0,
    )
}

pub fn mix_nominal(params: &PlatformParams, c0: &[f64; 4]) -> ControlWrench {
    ControlWrench::from_vector(&(nominal_matrix(params) * Vector4::from_column_slice(c0)))
}

fn clip(params: &PlatformParams, f: &mut [f64; 4]) -> bool {
    let mut sat = false;
    for v in f.iter_mut() {
        let c = v.clamp(0.0, params.f_max);
        sat |= c != *v;
        *v = c;
    }
    sat
}

/// Solves `A0 c0 = u` exactly and clips the result.
pub fn demix_nominal(params: &PlatformParams, u: &ControlWrench) -> Allocation {
    let c = nominal_matrix(params)
        .lu()
        .solve(&u.as_vector())
        .expect("A0 is invertible for l, b/k > 0");
    let raw = AugmentedCommand {
        thrusts: [c[0], c[1], c[2], c[3]],
        cog: [0.0; 2],
    };
    let mut command = raw;
    let saturated = clip(params, &mut command.thrusts);
    Allocation {
        raw,
        command,
        saturated,
    }
}

/// `A_aug(F_T)`: nominal columns plus the two CoG columns.
pub fn build_a_aug(params: &PlatformParams, f_t: f64) -> Matrix4x6 {
    let mut a = Matrix4x6::zeros();
    a.fixed_view_mut::<4, 4>(0, 0)
        .copy_from(&nominal_matrix(params));
    a[(1, 4)] = -f_t;
    a[(0, 5)] = f_t;
    a
}

/// Augmented-vector indices kept when `motor` fails, in ascending order.
fn kept_columns(motor: Motor) -> [usize; 4] {
    let dropped_cog = match motor.mode() {
        Mode::One => 4,
        Mode::Two => 5,
    };
    let mut kept = [0usize; 4];
    let mut n = 0;
    for i in 0..6 {
        if i != motor.slot() && i != dropped_cog {
            kept[n] = i;
            n += 1;
        }
    }
    kept
}

/// Exclusion matrix `E_k`: selects the healthy motors and the active CoG
/// component from `c_aug`.
pub fn exclusion_matrix(motor: Motor) -> Matrix6x4 {
    let mut e = Matrix6x4::zeros();
    for (col, row) in kept_columns(motor).into_iter().enumerate() {
        e[(row, col)] = 1.0;
    }
    e
}

/// `A_k(F_T) = A_aug(F_T) E_k`.
pub fn failsafe_matrix(params: &PlatformParams, motor: Motor, f_t: f64) -> Matrix4<f64> {
    build_a_aug(params, f_t) * exclusion_matrix(motor)
}

/// Exact solution of `A_k c_k = u_d` scattered back into `c_aug` form.
/// Errors only when `A_k` is singular (no thrust).
pub fn solve_failsafe(
    params: &PlatformParams,
    motor: Motor,
    u_d: &ControlWrench,
    f_t: f64,
) -> Result<Allocation, AllocationError> {
    if !(f_t > MIN_ALLOCATION_THRUST) {
        return Err(AllocationError::Singular(f_t));
    }
    let c_k = failsafe_matrix(params, motor, f_t)
        .lu()
        .solve(&u_d.as_vector())
        .ok_or(AllocationError::Singular(f_t))?;
    let c_aug = exclusion_matrix(motor) * c_k;
    let raw = AugmentedCommand {
        thrusts: [c_aug[0], c_aug[1], c_aug[2], c_aug[3]],
        cog: [c_aug[4], c_aug[5]],
    };
    let mut command = raw;
    let saturated = clip(params, &mut command.thrusts);
    Ok(Allocation {
        raw,
        command,
        saturated,
    })
}

/// Fail-safe allocation for a single motor failure, rejecting CoG offsets
/// the FP cannot reach.
pub fn allocate_failsafe(
    params: &PlatformParams,
    mode: FailsafeMode,
    u_d: &ControlWrench,
    f_t: f64,
) -> Result<Allocation, AllocationError> {
    let Some(motor) = mode.faulty else {
        return Ok(demix_nominal(params, u_d));
    };
    let alloc = solve_failsafe(params, motor, u_d, f_t)?;
    let limit = params.max_cog_offset();
    for d in alloc.raw.cog {
        if d.abs() > limit {
            return Err(AllocationError::UnreachableCog { d, limit });
        }
    }
    Ok(alloc)
}

/// Dual-failure allocation matrix with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFailure {
    pub motors: (Motor, Motor),
    /// Columns: the two healthy motors (ascending), then `d1`, `d2`.
    pub matrix: Matrix4<f64>,
    pub singular_values: Vector4<f64>,
    pub rank: usize,
    /// Present iff the matrix has full rank.
    pub inverse: Option<Matrix4<f64>>,
}

impl DualFailure {
    pub fn is_full_rank(&self) -> bool {
        self.rank == 4
    }

    /// Solves for `[F_a, F_b, d1, d2]` when invertible.
    pub fn solve(&self, u_d: &ControlWrench) -> Option<Vector4<f64>> {
        self.inverse.map(|inv| inv * u_d.as_vector())
    }

    pub fn healthy(&self) -> [Motor; 2] {
        let mut out = [Motor(1); 2];
        let mut n = 0;
        for m in Motor::ALL {
            if m != self.motors.0 && m != self.motors.1 {
                out[n] = m;
                n += 1;
            }
        }
        out
    }
}

/// Numerical rank: singular values below `RANK_TOLERANCE * sigma_max` are zero.
pub fn numerical_rank(m: &Matrix4<f64>) -> (usize, Vector4<f64>) {
    let sv = m.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count();
    (rank, sv)
}

pub fn dual_failure_allocator(
    params: &PlatformParams,
    j: Motor,
    k: Motor,
    f_t: f64,
) -> Result<DualFailure, AllocationError> {
    if j == k {
        return Err(AllocationError::SameMotor(j));
    }
    let a = build_a_aug(params, f_t);
    let cols: Vec<usize> = (0..6).filter(|&c| c != j.slot() && c != k.slot()).collect();
    let mut m = Matrix4::zeros();
    for (dst, &src) in cols.iter().enumerate() {
        m.set_column(dst, &a.column(src));
    }
    let (rank, singular_values) = numerical_rank(&m);
    let inverse = if rank == 4 { m.try_inverse() } else { None };
    let motors = if j < k { (j, k) } else { (k, j) };
    Ok(DualFailure {
        motors,
        matrix: m,
        singular_values,
        rank,
        inverse,
    })
}

/// `T_T^CoG = T_T + [d2, -d1, 0] F_T`.
pub fn cog_torque(params: &PlatformParams, c0: &[f64; 4], d: &[f64; 2], f_t: f64) -> Vector3<f64> {
    let t_t = crate::dynamics::thruster_torques(params, c0);
    t_t + Vector3::new(d[1], -d[0], 0.0) * f_t
}

/// The same torque written out per rotor.
pub fn cog_torque_componentwise(
    params: &PlatformParams,
    c0: &[f64; 4],
    d: &[f64; 2],
) -> Vector3<f64> {
    let l = params.arm;
    let bk = params.torque_coeff_ratio;
    let [f1, f2, f3, f4] = *c0;
    let [d1, d2] = *d;
    Vector3::new(
        (l + d2) * f2 + d2 * (f1 + f3) - (l - d2) * f4,
        (l - d1) * f1 - d1 * (f2 + f4) - (l + d1) * f3,
        bk * (f1 - f2 + f3 - f4),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p() -> PlatformParams {
        PlatformParams::prototype()
    }

    fn m(i: u8) -> Motor {
        Motor::new(i).unwrap()
    }

    #[test]
    fn motor_modes() {
        assert_eq!(m(2).mode(), Mode::One);
        assert_eq!(m(4).mode(), Mode::One);
        assert_eq!(m(1).mode(), Mode::Two);
        assert_eq!(m(3).mode(), Mode::Two);
        assert!(Motor::new(0).is_err());
        assert!(Motor::new(5).is_err());
    }

    #[test]
    fn nominal_mixing_columns() {
        let u = mix_nominal(&p(), &[2.0; 4]);
        assert_eq!(u, ControlWrench::new(0.0, 0.0, 0.0, 8.0));
        let u = mix_nominal(&p(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(u, ControlWrench::new(0.0, 0.15, 0.05, 1.0));
    }

    #[test]
    fn demix_hover_and_saturation() {
        let params = p();
        let a = demix_nominal(
            &params,
            &ControlWrench::new(0.0, 0.0, 0.0, params.hover_thrust()),
        );
        for f in a.command.thrusts {
            assert_abs_diff_eq!(f, params.hover_thrust() / 4.0, epsilon = 1e-12);
            assert!((f - 3.213).abs() < 1e-3);
        }
        assert!(!a.saturated);
        let a = demix_nominal(
            &params,
            &ControlWrench::new(5.0, 0.0, 0.0, params.hover_thrust()),
        );
        assert!(a.saturated);
        assert!(a
            .command
            .thrusts
            .iter()
            .all(|&f| (0.0..=params.f_max).contains(&f)));
    }

    #[test]
    fn a_aug_structure() {
        let params = p();
        let a = build_a_aug(&params, 0.0);
        assert!(a.column(4).iter().all(|&x| x == 0.0));
        assert!(a.column(5).iter().all(|&x| x == 0.0));
        let mg = params.hover_thrust();
        let a = build_a_aug(&params, mg);
        assert_eq!(a.column(5).into_owned(), Vector4::new(mg, 0.0, 0.0, 0.0));
        assert!((a[(0, 5)] - 12.85).abs() < 0.01);
        let c0 = [1.0, 2.0, 3.0, 4.5];
        let c = AugmentedCommand {
            thrusts: c0,
            cog: [0.0; 2],
        };
        assert_eq!(a * c.as_vector(), mix_nominal(&params, &c0).as_vector());
    }

    #[test]
    fn e2_matches_hand_written_matrix() {
        let e2t = exclusion_matrix(m(2)).transpose();
        #[rustfmt::skip]
        let expect = SMatrix::<f64, 4, 6>::from_row_slice(&[
            1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        assert_eq!(e2t, expect);
    }

    #[test]
    fn exclusion_matrices_are_orthonormal_selections() {
        for k in Motor::ALL {
            let e = exclusion_matrix(k);
            assert_eq!(e.transpose() * e, Matrix4::identity());
        }
        let e1 = exclusion_matrix(m(1));
        assert!(e1.row(0).iter().all(|&x| x == 0.0));
        assert!(e1.row(5).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn a2_matches_hand_written_form() {
        let params = p();
        let f = 12.0;
        let l = params.arm;
        let bk = params.torque_coeff_ratio;
        #[rustfmt::skip]
        let expect = Matrix4::new(
            0.0, 0.0, -l, f,
            l, -l, 0.0, 0.0,
            bk, bk, -bk, 0.0,
            1.0, 1.0, 1.0, 0.0,
        );
        assert_eq!(failsafe_matrix(&params, m(2), f), expect);
    }

    #[test]
    fn mode1_hover_allocation() {
        let params = p();
        let mg = params.hover_thrust();
        let u = ControlWrench::new(0.0, 0.0, 0.0, mg);
        let a = allocate_failsafe(&params, FailsafeMode::failed(m(2)), &u, mg).unwrap();
        let f = a.command.thrusts;
        assert_eq!(f[1], 0.0);
        assert_abs_diff_eq!(f[0], mg / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], mg / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[3], mg / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.command.cog[1], 0.075, epsilon = 1e-12);
        assert_eq!(a.command.cog[0], 0.0);

        let u = ControlWrench::new(0.1, 0.0, 0.0, mg);
        let b = allocate_failsafe(&params, FailsafeMode::failed(m(2)), &u, mg).unwrap();
        assert_abs_diff_eq!(b.command.cog[1], 0.075 + 0.1 / mg, epsilon = 1e-12);
        assert!((b.command.cog[1] - 0.0828).abs() < 1e-4);
        for i in 0..4 {
            assert_abs_diff_eq!(b.command.thrusts[i], f[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn failsafe_errors() {
        let params = p();
        let u = ControlWrench::new(0.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            allocate_failsafe(&params, FailsafeMode::failed(m(2)), &u, 0.0),
            Err(AllocationError::Singular(_))
        ));
        let u = ControlWrench::new(2.0, 0.0, 0.0, params.hover_thrust());
        assert!(matches!(
            allocate_failsafe(
                &params,
                FailsafeMode::failed(m(2)),
                &u,
                params.hover_thrust()
            ),
            Err(AllocationError::UnreachableCog { .. })
        ));
    }

    #[test]
    fn opposite_pairs_lose_rank() {
        let params = p();
        let mg = params.hover_thrust();
        for (a, b) in [(1, 3), (2, 4)] {
            let d = dual_failure_allocator(&params, m(a), m(b), mg).unwrap();
            assert_eq!(d.rank, 3);
            assert!(d.inverse.is_none());
        }
        for (a, b) in [(1, 2), (2, 3), (3, 4), (1, 4)] {
            let d = dual_failure_allocator(&params, m(a), m(b), mg).unwrap();
            assert_eq!(d.rank, 4, "({a},{b})");
        }
        assert!(dual_failure_allocator(&params, m(1), m(1), mg).is_err());
    }

    #[test]
    fn adjacent_pair_solves() {
        let params = p();
        let mg = params.hover_thrust();
        let d = dual_failure_allocator(&params, m(1), m(2), mg).unwrap();
        let u = ControlWrench::new(0.05, -0.02, 0.01, mg);
        let c = d.solve(&u).unwrap();
        assert!((d.matrix * c - u.as_vector()).norm() < 1e-10);
        assert_eq!(d.healthy(), [m(3), m(4)]);
    }

    #[test]
    fn cog_torque_forms_agree() {
        let params = p();
        let c0 = [3.0, 3.0, 3.0, 3.0];
        assert_eq!(
            cog_torque(&params, &c0, &[0.0, 0.0], 12.0),
            crate::dynamics::thruster_torques(&params, &c0)
        );
        let mg = params.hover_thrust();
        let h = [mg / 4.0; 4];
        let t = cog_torque(&params, &h, &[0.0, 0.01], mg);
        assert_abs_diff_eq!(t.x, mg * 0.01, epsilon = 1e-12);
        assert!((t.x - 0.1285).abs() < 1e-4);
    }
}
