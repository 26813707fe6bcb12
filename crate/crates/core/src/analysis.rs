//! Commanded-versus-actual tracking error statistics from telemetry.
//!
//! Only rows where an arm is clutched or tracking a target count toward that
//! arm's statistics. Position errors are `ee_cmd − ee_actual` in the vehicle
//! frame; the orientation error is the angle of `R_cmdᵀ · R_actual`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{rotation_angle, JOINT_COUNT};
use crate::sim::TelemetryRecord;
use crate::teleop::Device;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("telemetry has no rows")]
    Empty,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub rms: f64,
    pub max: f64,
}

#[derive(Default)]
struct Accumulator {
    sum_sq: f64,
    max: f64,
    n: usize,
}

impl Accumulator {
    fn push(&mut self, v: f64) {
        let a = v.abs();
        self.sum_sq += a * a;
        self.max = self.max.max(a);
        self.n += 1;
    }

    fn finish(&self) -> ChannelStats {
        if self.n == 0 {
            return ChannelStats::default();
        }
        let rms = (self.sum_sq / self.n as f64).sqrt();
        // Rounding can put the RMS of equal samples one ulp above the max.
        ChannelStats {
            rms: rms.min(self.max),
            max: self.max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub device: Device,
    /// Rows with an active command.
    pub samples: usize,
    /// `|q_cmd − q|` per joint, rad.
    pub joints: [ChannelStats; JOINT_COUNT],
    /// End-effector position error along x, y, z of the vehicle frame, m.
    pub position: [ChannelStats; 3],
    /// rad.
    pub orientation: ChannelStats,
    /// Axes by decreasing position RMS; ties keep x, y, z order.
    pub axis_ranking: [char; 3],
    /// 1-based joint with the largest RMS; ties go to the lower index.
    pub worst_joint: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: usize,
    pub duration: f64,
    pub arms: Vec<ArmReport>,
}

pub fn analyze(records: &[TelemetryRecord]) -> Result<ErrorReport, AnalysisError> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(AnalysisError::Empty),
    };
    let arms = Device::BOTH
        .iter()
        .map(|&d| arm_report(records, d))
        .collect();
    Ok(ErrorReport {
        rows: records.len(),
        duration: last.time - first.time,
        arms,
    })
}

fn arm_report(records: &[TelemetryRecord], device: Device) -> ArmReport {
    let i = device.index();
    let mut joints: [Accumulator; JOINT_COUNT] = Default::default();
    let mut position: [Accumulator; 3] = Default::default();
    let mut orientation = Accumulator::default();
    let mut samples = 0;
    for r in records.iter().filter(|r| r.mode.arms[i].is_active()) {
        let arm = &r.arms[i];
        samples += 1;
        for j in 0..JOINT_COUNT {
            joints[j].push(arm.q_cmd[j] - arm.q[j]);
        }
        let d = arm.ee_cmd.position - arm.ee_actual.position;
        for k in 0..3 {
            position[k].push(d[k]);
        }
        let cmd = arm.ee_cmd.to_transform().rotation;
        let act = arm.ee_actual.to_transform().rotation;
        orientation.push(rotation_angle(&(cmd.transpose() * act)));
    }
    let joints = joints.each_ref().map(Accumulator::finish);
    let position = position.each_ref().map(Accumulator::finish);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| position[b].rms.total_cmp(&position[a].rms));
    let axis_ranking = order.map(|k| ['x', 'y', 'z'][k]);
    let worst_joint = (0..JOINT_COUNT)
        .fold(0, |best, j| if joints[j].rms > joints[best].rms { j } else { best })
        + 1;

    ArmReport {
        device,
        samples,
        joints,
        position,
        orientation: orientation.finish(),
        axis_ranking,
        worst_joint,
    }
}

impl ErrorReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rows: {}  duration: {:.2} s", self.rows, self.duration);
        for arm in &self.arms {
            let _ = writeln!(s, "\n[{}] active rows: {}", arm.device, arm.samples);
            let _ = writeln!(s, "  joint   rms (rad)     max (rad)");
            for (j, c) in arm.joints.iter().enumerate() {
                let _ = writeln!(s, "  {:<5}   {:<12.6e}  {:.6e}", j + 1, c.rms, c.max);
            }
            let _ = writeln!(s, "  axis    rms (m)       max (m)");
            for (k, c) in arm.position.iter().enumerate() {
                let _ = writeln!(s, "  {:<5}   {:<12.6e}  {:.6e}", ['x', 'y', 'z'][k], c.rms, c.max);
            }
            let _ = writeln!(
                s,
                "  orientation rms {:.6e} rad, max {:.6e} rad",
                arm.orientation.rms, arm.orientation.max
            );
            let ranking: Vec<String> = arm.axis_ranking.iter().map(char::to_string).collect();
            let _ = writeln!(s, "  axis ranking by rms: {}", ranking.join(" > "));
            let _ = writeln!(s, "  largest joint rms: joint {}", arm.worst_joint);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Per-arm time series for plotting: `(file name, CSV text)`.
pub fn time_series(records: &[TelemetryRecord]) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for d in Device::BOTH {
        let i = d.index();
        let mut joints = String::from("time,active");
        for j in 1..=JOINT_COUNT {
            let _ = write!(joints, ",q_cmd_{j},q_{j},err_{j}");
        }
        joints.push('\n');
        let mut ee = String::from(
            "time,active,cmd_x,cmd_y,cmd_z,act_x,act_y,act_z,err_x,err_y,err_z,err_angle\n",
        );
        for r in records {
            let arm = &r.arms[i];
            let active = u8::from(r.mode.arms[i].is_active());
            let _ = write!(joints, "{},{}", r.time, active);
            for j in 0..JOINT_COUNT {
                let _ = write!(joints, ",{},{},{}", arm.q_cmd[j], arm.q[j], arm.q_cmd[j] - arm.q[j]);
            }
            joints.push('\n');
            let (c, a) = (arm.ee_cmd.position, arm.ee_actual.position);
            let angle = rotation_angle(
                &(arm.ee_cmd.to_transform().rotation.transpose() * arm.ee_actual.to_transform().rotation),
            );
            let _ = writeln!(
                ee,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.time,
                active,
                c.x,
                c.y,
                c.z,
                a.x,
                a.y,
                a.z,
                c.x - a.x,
                c.y - a.y,
                c.z - a.z,
                angle
            );
        }
        files.push((format!("{d}_joints.csv"), joints));
        files.push((format!("{d}_ee.csv"), ee));
    }
    files
}
