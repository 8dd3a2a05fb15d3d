//! Scenario-driven closed-loop simulation: plant, controller, detector and
//! failure injection on a fixed-step schedule.

pub mod scenario;
pub mod summary;
pub mod telemetry;

pub use scenario::{AbortKind, Assertions, Scenario, ScenarioError, SetpointEvent, SetpointKind};
pub use summary::{check_assertions, summarize, Summary, SummaryConfig};
pub use telemetry::{read_csv, write_csv, RecordStatus, TelemetryError, TelemetryRecord};

use crate::allocation::dual_failure_allocator;
use crate::control::{AttitudeSetpoint, ControlOutput, FilterError, FlightController, Reference};
use crate::dynamics::{cog_offset, step, thruster_torques, InteractionTorques, PlatformState};
use crate::fault::FaultDetector;
use nalgebra::Vector3;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("controller setup failed: {0}")]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn aborted(&self) -> Option<AbortKind> {
        self.records.last().and_then(|r| match r.status {
            RecordStatus::Aborted(k) => Some(k),
            RecordStatus::Ok => None,
        })
    }
}

/// Reference in effect, updated by setpoint events.
#[derive(Debug, Clone, Copy)]
struct ReferenceState {
    position: Vector3<f64>,
    yaw: f64,
    attitude: Option<AttitudeSetpoint>,
}

impl ReferenceState {
    fn apply(&mut self, kind: &SetpointKind) {
        match *kind {
            SetpointKind::Position(p) => {
                self.position = p;
                self.attitude = None;
            }
            SetpointKind::Height(h) => {
                self.position.z = -h;
                self.attitude = None;
            }
            SetpointKind::Yaw(y) => {
                self.yaw = y;
                if let Some(a) = self.attitude.as_mut() {
                    a.attitude.z = y;
                }
            }
            SetpointKind::Attitude { attitude, thrust } => {
                self.yaw = attitude.z;
                self.attitude = Some(AttitudeSetpoint { attitude, thrust });
            }
        }
    }

    fn reference(&self) -> Reference {
        match self.attitude {
            Some(a) => Reference::Attitude(a),
            None => Reference::Position {
                position: self.position,
                yaw: self.yaw,
            },
        }
    }
}

fn mask(motors: &[crate::allocation::Motor]) -> u8 {
    motors.iter().fold(0, |m, k| m | (1 << k.slot()))
}

#[allow(clippy::too_many_arguments)]
fn record(
    scenario: &Scenario,
    t: f64,
    state: &PlatformState,
    reference: &ReferenceState,
    out: &ControlOutput,
    actual: [f64; 4],
    detector: &FaultDetector,
    failed_mask: u8,
    mode: u8,
    status: RecordStatus,
) -> TelemetryRecord {
    let p = &scenario.params;
    let t_t = thruster_torques(p, &actual);
    let inter = InteractionTorques::idle(p, out.inputs.tau_rs, out.inputs.tau_ps, t_t.z);
    let realised = t_t + inter.t_ct;
    let cog = cog_offset(p, state.alpha_r(), state.alpha_p());
    let fault = detector.status();
    let sp = &out.setpoint;
    TelemetryRecord {
        t,
        position: state.x_t.into(),
        position_d: reference.position.into(),
        q_t: state.q_t.into(),
        q_f: state.q_f.into(),
        alpha: [state.alpha_r(), state.alpha_p()],
        alpha_d: out.alpha_d,
        attitude_d: [sp.attitude.x, sp.attitude.y, sp.attitude.z, sp.thrust],
        thrust_cmd: out.inputs.thrusts,
        thrust_act: actual,
        cog: [cog.x, cog.y],
        tau_rs: out.inputs.tau_rs,
        tau_ps: out.inputs.tau_ps,
        u_d: out.u_d.as_vector().into(),
        u: [realised.x, realised.y, realised.z, actual.iter().sum()],
        fault_detected: fault.detected(),
        fault_motor: fault.motor().map_or(0, |m| m.index()),
        failed_mask,
        mode,
        thrust_saturated: out.saturation.thrust || out.allocation.saturated,
        servo_saturated: out.saturation.servo,
        status,
    }
}

/// Runs a validated scenario to completion or to the first abort.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let p = scenario.params;
    let period = scenario.control_period();
    let substeps = scenario.substeps();
    let dt = scenario.physics_dt;
    let mut controller = FlightController::new(p, scenario.gains, scenario.limits, period)?;
    let mut detector = FaultDetector::new(scenario.detector);
    let mut state = PlatformState::at_rest(scenario.initial_position, scenario.initial_yaw);
    let mut reference = ReferenceState {
        position: scenario.initial_position,
        yaw: scenario.initial_yaw,
        attitude: None,
    };
    let mut next_event = 0;
    let ticks = scenario.ticks();
    let mut records = Vec::with_capacity(ticks + 1);

    'ticks: for k in 0..ticks {
        let t = k as f64 * period;
        while let Some(ev) = scenario.setpoints.get(next_event) {
            if ev.time > t + 1e-9 {
                break;
            }
            reference.apply(&ev.kind);
            next_event += 1;
        }

        let status = detector.update(t, state.w_t.x, state.w_t.y);
        if let Some(m) = status.motor() {
            controller.enter_failsafe(m);
        }

        let out = controller.tick(&reference.reference(), &state);
        let failed = scenario.failures.failed_at(t);
        let failed_mask = mask(&failed);
        let mode = controller.mode().mode().map_or(0, |m| m.number());
        let actual = scenario.failures.apply(t, &out.inputs.thrusts);

        if let [a, b, ..] = failed.as_slice() {
            let rank = dual_failure_allocator(&p, *a, *b, p.hover_thrust()).map_or(0, |d| d.rank);
            if rank < 4 {
                records.push(record(
                    scenario,
                    t,
                    &state,
                    &reference,
                    &out,
                    actual,
                    &detector,
                    failed_mask,
                    mode,
                    RecordStatus::Aborted(AbortKind::CapabilityLoss),
                ));
                break 'ticks;
            }
        }

        let rec = record(
            scenario,
            t,
            &state,
            &reference,
            &out,
            actual,
            &detector,
            failed_mask,
            mode,
            RecordStatus::Ok,
        );
        records.push(rec);

        for j in 0..substeps {
            let tj = t + j as f64 * dt;
            let mut inputs = out.inputs;
            inputs.thrusts = scenario.failures.apply(tj, &out.inputs.thrusts);
            match step(&p, &state, &inputs, dt) {
                Ok(next) => state = next,
                Err(_) => {
                    let mut diag = rec;
                    diag.t = tj;
                    diag.position = state.x_t.into();
                    diag.q_t = state.q_t.into();
                    diag.q_f = state.q_f.into();
                    diag.alpha = [state.alpha_r(), state.alpha_p()];
                    diag.status = RecordStatus::Aborted(AbortKind::Divergence);
                    records.push(diag);
                    break 'ticks;
                }
            }
        }
    }

    let summary = summarize(
        &records,
        &p,
        &SummaryConfig {
            convergence_threshold: scenario.convergence_threshold,
            convergence_hold: scenario.convergence_hold,
        },
    );
    Ok(RunOutput { records, summary })
}
