//! Per-tick telemetry and its CSV form.
//!
//! Floats are written as `{:e}`, the shortest form that parses back to the
//! same value, so a reloaded log reproduces its summary exactly. Flags are
//! `0`/`1`; `fault_motor` is `0` before detection; `failed_mask` has bit
//! `k-1` set once motor `k` is cut; `mode` is `0` (nominal), `1` or `2`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    Aborted(super::AbortKind),
}

impl RecordStatus {
    fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Aborted(k) => k.name(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => RecordStatus::Ok,
            "capability_loss" => RecordStatus::Aborted(super::AbortKind::CapabilityLoss),
            "divergence" => RecordStatus::Aborted(super::AbortKind::Divergence),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub position: [f64; 3],
    pub position_d: [f64; 3],
    pub q_t: [f64; 3],
    pub q_f: [f64; 3],
    pub alpha: [f64; 2],
    pub alpha_d: [f64; 2],
    /// Shaped attitude setpoint and thrust actually tracked.
    pub attitude_d: [f64; 4],
    pub thrust_cmd: [f64; 4],
    pub thrust_act: [f64; 4],
    /// CoG offset realised by the measured relative attitude.
    pub cog: [f64; 2],
    pub tau_rs: f64,
    pub tau_ps: f64,
    /// Desired wrench `[T_O; F_T]`.
    pub u_d: [f64; 4],
    /// Realised TP wrench from actual thrusts and servo torques.
    pub u: [f64; 4],
    pub fault_detected: bool,
    pub fault_motor: u8,
    pub failed_mask: u8,
    pub mode: u8,
    pub thrust_saturated: bool,
    pub servo_saturated: bool,
    pub status: RecordStatus,
}

const FLOAT_COLUMNS: &[&str] = &[
    "t",
    "x",
    "y",
    "z",
    "x_d",
    "y_d",
    "z_d",
    "roll_t",
    "pitch_t",
    "yaw_t",
    "roll_f",
    "pitch_f",
    "yaw_f",
    "alpha_r",
    "alpha_p",
    "alpha_r_d",
    "alpha_p_d",
    "roll_d",
    "pitch_d",
    "yaw_d",
    "thrust_d",
    "f1_cmd",
    "f2_cmd",
    "f3_cmd",
    "f4_cmd",
    "f1_act",
    "f2_act",
    "f3_act",
    "f4_act",
    "d1c",
    "d2c",
    "tau_rs",
    "tau_ps",
    "ud_roll",
    "ud_pitch",
    "ud_yaw",
    "ud_thrust",
    "u_roll",
    "u_pitch",
    "u_yaw",
    "u_thrust",
];

const TAIL_COLUMNS: &[&str] = &[
    "fault_detected",
    "fault_motor",
    "failed_mask",
    "mode",
    "thrust_sat",
    "servo_sat",
    "status",
];

pub fn header() -> String {
    let mut cols: Vec<&str> = FLOAT_COLUMNS.to_vec();
    cols.extend_from_slice(TAIL_COLUMNS);
    cols.join(",")
}

impl TelemetryRecord {
    fn floats(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend(self.position);
        v.extend(self.position_d);
        v.extend(self.q_t);
        v.extend(self.q_f);
        v.extend(self.alpha);
        v.extend(self.alpha_d);
        v.extend(self.attitude_d);
        v.extend(self.thrust_cmd);
        v.extend(self.thrust_act);
        v.extend(self.cog);
        v.push(self.tau_rs);
        v.push(self.tau_ps);
        v.extend(self.u_d);
        v.extend(self.u);
        v
    }

    pub fn to_csv_row(&self) -> String {
        let mut out: Vec<String> = self.floats().iter().map(|f| format!("{f:e}")).collect();
        out.push(u8::from(self.fault_detected).to_string());
        out.push(self.fault_motor.to_string());
        out.push(self.failed_mask.to_string());
        out.push(self.mode.to_string());
        out.push(u8::from(self.thrust_saturated).to_string());
        out.push(u8::from(self.servo_saturated).to_string());
        out.push(self.status.as_str().to_string());
        out.join(",")
    }

    fn from_csv_row(row: &str) -> Result<Self, String> {
        let cells: Vec<&str> = row.split(',').collect();
        let n = FLOAT_COLUMNS.len();
        if cells.len() != n + TAIL_COLUMNS.len() {
            return Err(format!(
                "expected {} cells, found {}",
                n + TAIL_COLUMNS.len(),
                cells.len()
            ));
        }
        let f: Vec<f64> = cells[..n]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| format!("bad number `{c}`")))
            .collect::<Result<_, _>>()?;
        let int = |i: usize| {
            cells[n + i]
                .parse::<u8>()
                .map_err(|_| format!("bad integer `{}`", cells[n + i]))
        };
        let arr3 = |a: usize| -> [f64; 3] { [f[a], f[a + 1], f[a + 2]] };
        let arr4 = |a: usize| -> [f64; 4] { [f[a], f[a + 1], f[a + 2], f[a + 3]] };
        let arr2 = |a: usize| -> [f64; 2] { [f[a], f[a + 1]] };
        Ok(Self {
            t: f[0],
            position: arr3(1),
            position_d: arr3(4),
            q_t: arr3(7),
            q_f: arr3(10),
            alpha: arr2(13),
            alpha_d: arr2(15),
            attitude_d: arr4(17),
            thrust_cmd: arr4(21),
            thrust_act: arr4(25),
            cog: arr2(29),
            tau_rs: f[31],
            tau_ps: f[32],
            u_d: arr4(33),
            u: arr4(37),
            fault_detected: int(0)? != 0,
            fault_motor: int(1)?,
            failed_mask: int(2)?,
            mode: int(3)?,
            thrust_saturated: int(4)? != 0,
            servo_saturated: int(5)? != 0,
            status: RecordStatus::parse(cells[n + 6])
                .ok_or_else(|| format!("bad status `{}`", cells[n + 6]))?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TelemetryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Writes the whole CSV to a temporary sibling and renames it into place,
/// so an interrupted write never leaves a truncated file at `path`.
pub fn write_csv(records: &[TelemetryRecord], path: &Path) -> Result<(), TelemetryError> {
    let io = |source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    {
        let file = std::fs::File::create(&tmp).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        write_rows(records, &mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn write_rows(records: &[TelemetryRecord], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", header())?;
    for r in records {
        writeln!(w, "{}", r.to_csv_row())?;
    }
    Ok(())
}

pub fn to_csv_string(records: &[TelemetryRecord]) -> String {
    let mut buf = Vec::new();
    write_rows(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}

pub fn read_csv(path: &Path) -> Result<Vec<TelemetryRecord>, TelemetryError> {
    let file = std::fs::File::open(path).map_err(|source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fmt = |line: usize, message: String| TelemetryError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TelemetryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if i == 0 {
            if line != header() {
                return Err(fmt(1, "unexpected header".into()));
            }
            continue;
        }
        out.push(TelemetryRecord::from_csv_row(&line).map_err(|m| fmt(i + 1, m))?);
    }
    Ok(out)
}
