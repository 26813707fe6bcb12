//! One CSV row per simulation step.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a parsed
//! record is bit-identical to the one written and two identical runs produce
//! byte-identical files.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GraspStatus;
use crate::kinematics::{JointVector, Transform, Vec3, JOINT_COUNT};
use crate::vehicle_teleop::VelocityCommand;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("telemetry I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("telemetry CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("telemetry header does not match the expected column layout")]
    Header,
    #[error("telemetry row {row}: {reason}")]
    Row { row: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemMode {
    Idle,
    Arm,
    Vehicle,
}

/// What an arm is doing this step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmActivity {
    /// No target yet.
    Idle,
    /// Holding or converging on the last target.
    Tracking,
    /// Following the stylus.
    Clutched,
}

impl ArmActivity {
    fn code(self) -> char {
        match self {
            ArmActivity::Idle => '-',
            ArmActivity::Tracking => 't',
            ArmActivity::Clutched => 'c',
        }
    }

    pub fn is_active(self) -> bool {
        self != ArmActivity::Idle
    }
}

/// Encoded in telemetry as `sys/LR`, e.g. `arm/ct` or `vehicle/tt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub system: SystemMode,
    pub arms: [ArmActivity; 2],
}

impl Default for Mode {
    fn default() -> Self {
        Self {
            system: SystemMode::Idle,
            arms: [ArmActivity::Idle; 2],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sys = match self.system {
            SystemMode::Idle => "idle",
            SystemMode::Arm => "arm",
            SystemMode::Vehicle => "vehicle",
        };
        write!(f, "{sys}/{}{}", self.arms[0].code(), self.arms[1].code())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sys, arms) = s.split_once('/').ok_or_else(|| format!("bad mode {s:?}"))?;
        let system = match sys {
            "idle" => SystemMode::Idle,
            "arm" => SystemMode::Arm,
            "vehicle" => SystemMode::Vehicle,
            _ => return Err(format!("bad system mode {sys:?}")),
        };
        let codes: Vec<char> = arms.chars().collect();
        if codes.len() != 2 {
            return Err(format!("bad arm modes {arms:?}"));
        }
        let mut out = [ArmActivity::Idle; 2];
        for (slot, c) in out.iter_mut().zip(codes) {
            *slot = match c {
                '-' => ArmActivity::Idle,
                't' => ArmActivity::Tracking,
                'c' => ArmActivity::Clutched,
                _ => return Err(format!("bad arm mode {c:?}")),
            };
        }
        Ok(Mode { system, arms: out })
    }
}

/// Position and `[w, x, y, z]` quaternion exactly as stored in the file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSample {
    pub position: Vec3,
    pub quaternion: [f64; 4],
}

impl PoseSample {
    pub fn from_transform(t: &Transform) -> Self {
        Self {
            position: t.translation,
            quaternion: t.quaternion_wxyz(),
        }
    }

    pub fn to_transform(&self) -> Transform {
        Transform::from_position_quaternion(self.position.into(), self.quaternion)
            .unwrap_or_else(|_| Transform::from_translation(self.position))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmTelemetry {
    pub q_cmd: JointVector,
    pub q: JointVector,
    /// FK of `q_cmd` in `{ROV}`.
    pub ee_cmd: PoseSample,
    /// FK of `q` in `{ROV}`.
    pub ee_actual: PoseSample,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelemetryRecord {
    pub time: f64,
    pub arms: [ArmTelemetry; 2],
    pub grippers: [f64; 2],
    pub vehicle_position: Vec3,
    pub vehicle_yaw: f64,
    pub vehicle_cmd: VelocityCommand,
    pub grasp: GraspStatus,
    pub mode: Mode,
}

const POSE_FIELDS: [&str; 7] = ["x", "y", "z", "qw", "qx", "qy", "qz"];

/// Column names in file order.
pub fn header() -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for arm in ["left", "right"] {
        for kind in ["q_cmd", "q"] {
            for j in 1..=JOINT_COUNT {
                h.push(format!("{arm}_{kind}_{j}"));
            }
        }
        for kind in ["ee_cmd", "ee_act"] {
            for f in POSE_FIELDS {
                h.push(format!("{arm}_{kind}_{f}"));
            }
        }
    }
    h.extend(
        [
            "gripper_left",
            "gripper_right",
            "vehicle_x",
            "vehicle_y",
            "vehicle_z",
            "vehicle_yaw",
            "cmd_vx",
            "cmd_vy",
            "cmd_vz",
            "cmd_yaw_rate",
            "grasp",
            "mode",
        ]
        .map(String::from),
    );
    h
}

fn push_pose(out: &mut Vec<String>, p: &PoseSample) {
    for v in p.position.iter().chain(p.quaternion.iter()) {
        out.push(v.to_string());
    }
}

impl TelemetryRecord {
    pub fn to_fields(&self) -> Vec<String> {
        let mut out = vec![self.time.to_string()];
        for arm in &self.arms {
            out.extend(arm.q_cmd.iter().map(f64::to_string));
            out.extend(arm.q.iter().map(f64::to_string));
            push_pose(&mut out, &arm.ee_cmd);
            push_pose(&mut out, &arm.ee_actual);
        }
        out.extend(self.grippers.iter().map(f64::to_string));
        out.extend(self.vehicle_position.iter().map(f64::to_string));
        out.push(self.vehicle_yaw.to_string());
        out.extend(self.vehicle_cmd.linear.iter().map(f64::to_string));
        out.push(self.vehicle_cmd.yaw_rate.to_string());
        out.push(self.grasp.to_string());
        out.push(self.mode.to_string());
        out
    }

    fn from_fields(row: usize, rec: &csv::StringRecord) -> Result<Self, TelemetryError> {
        let bad = |reason: String| TelemetryError::Row { row, reason };
        if rec.len() != header().len() {
            return Err(bad(format!("expected {} fields, got {}", header().len(), rec.len())));
        }
        let mut it = rec.iter();
        let mut num = || -> Result<f64, TelemetryError> {
            let s = it.next().unwrap_or_default();
            s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")))
        };
        let time = num()?;
        let mut arms = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut q_cmd = JointVector::zeros();
            let mut q = JointVector::zeros();
            for j in 0..JOINT_COUNT {
                q_cmd[j] = num()?;
            }
            for j in 0..JOINT_COUNT {
                q[j] = num()?;
            }
            let mut poses = [PoseSample {
                position: Vec3::zeros(),
                quaternion: [1.0, 0.0, 0.0, 0.0],
            }; 2];
            for p in poses.iter_mut() {
                p.position = Vec3::new(num()?, num()?, num()?);
                p.quaternion = [num()?, num()?, num()?, num()?];
            }
            arms.push(ArmTelemetry {
                q_cmd,
                q,
                ee_cmd: poses[0],
                ee_actual: poses[1],
            });
        }
        let grippers = [num()?, num()?];
        let vehicle_position = Vec3::new(num()?, num()?, num()?);
        let vehicle_yaw = num()?;
        let vehicle_cmd = VelocityCommand {
            linear: Vec3::new(num()?, num()?, num()?),
            yaw_rate: num()?,
        };
        let grasp = match &rec[rec.len() - 2] {
            "free" => GraspStatus::Free,
            "caged" => GraspStatus::Caged,
            other => return Err(bad(format!("bad grasp status {other:?}"))),
        };
        let mode = rec[rec.len() - 1].parse::<Mode>().map_err(bad)?;
        Ok(Self {
            time,
            arms: [arms[0], arms[1]],
            grippers,
            vehicle_position,
            vehicle_yaw,
            vehicle_cmd,
            grasp,
            mode,
        })
    }
}

pub struct TelemetryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(sink: W) -> Result<Self, TelemetryError> {
        let mut inner = csv::WriterBuilder::new().from_writer(sink);
        inner.write_record(header())?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, rec: &TelemetryRecord) -> Result<(), TelemetryError> {
        self.inner.write_record(rec.to_fields())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TelemetryError> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, TelemetryError> {
        self.inner
            .into_inner()
            .map_err(|e| TelemetryError::Io(e.into_error()))
    }
}

/// Serializes a whole run to CSV text.
pub fn to_csv_bytes(records: &[TelemetryRecord]) -> Result<Vec<u8>, TelemetryError> {
    let mut w = TelemetryWriter::new(Vec::new())?;
    for r in records {
        w.write(r)?;
    }
    w.into_inner()
}

pub fn read_telemetry<R: Read>(source: R) -> Result<Vec<TelemetryRecord>, TelemetryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let expected = header();
    let got = rdr.headers()?;
    if got.len() != expected.len() || got.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(TelemetryError::Header);
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        out.push(TelemetryRecord::from_fields(i + 2, &rec?)?);
    }
    Ok(out)
}
