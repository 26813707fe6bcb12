//! Dual-stylus vehicle piloting.
//!
//! Each stylus contributes its displacement from the position registered when
//! vehicle mode began. Both displacements must leave the dead-zone and agree
//! on a dominant axis. Same sign → constant-speed translation along that axis;
//! opposite signs on the depth axis → constant yaw rate. Anything else → stop.

use serde::{Deserialize, Serialize};

use crate::kinematics::{Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleTeleopConfig {
    /// Minimum stylus displacement norm, m.
    pub dead_zone: f64,
    /// Commanded speed along the selected axis, m/s.
    pub linear_speed: f64,
    /// Commanded yaw rate magnitude, rad/s.
    pub yaw_rate: f64,
}

impl Default for VehicleTeleopConfig {
    fn default() -> Self {
        Self {
            dead_zone: 0.02,
            linear_speed: 0.2,
            yaw_rate: 0.3,
        }
    }
}

/// Body-frame vehicle velocity request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// m/s in `{ROV}`.
    pub linear: Vec3,
    /// rad/s about the vehicle z axis.
    pub yaw_rate: f64,
}

impl VelocityCommand {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.linear == Vec3::zeros() && self.yaw_rate == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dominant {
    pub axis: Axis,
    /// `true` for the positive direction.
    pub positive: bool,
}

/// Stylus position relative to its vehicle-mode anchor; orientation is ignored.
pub fn displacement_vector(anchor_position: &Vec3, current_position: &Vec3) -> Vec3 {
    current_position - anchor_position
}

/// Axis with the largest absolute component, or `None` inside the dead-zone
/// or on an exact tie for the largest component.
pub fn dominant_axis(v: &Vec3, dead_zone: f64) -> Option<Dominant> {
    if !(v.norm() > dead_zone) {
        return None;
    }
    let mags = [v.x.abs(), v.y.abs(), v.z.abs()];
    let best = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut winners = mags.iter().enumerate().filter(|(_, m)| **m == best);
    let (idx, _) = winners.next()?;
    if winners.next().is_some() {
        return None;
    }
    let axis = match idx {
        0 => Axis::X,
        1 => Axis::Y,
        _ => Axis::Z,
    };
    Some(Dominant {
        axis,
        positive: v[idx] > 0.0,
    })
}

/// Combines both stylus displacements (in haptic-frame axes) into a vehicle
/// command. `haptic_to_rov` maps a haptic axis direction into `{ROV}`.
///
/// Yaw sign: left stylus toward `+z_H` with right toward `-z_H` is positive yaw.
pub fn vehicle_command(
    left: &Vec3,
    right: &Vec3,
    cfg: &VehicleTeleopConfig,
    haptic_to_rov: &Rotation,
) -> VelocityCommand {
    let (Some(l), Some(r)) = (
        dominant_axis(left, cfg.dead_zone),
        dominant_axis(right, cfg.dead_zone),
    ) else {
        return VelocityCommand::zero();
    };
    if l.axis != r.axis {
        return VelocityCommand::zero();
    }
    if l.positive == r.positive {
        let mut dir = Vec3::zeros();
        dir[l.axis as usize] = if l.positive { 1.0 } else { -1.0 };
        return VelocityCommand {
            linear: haptic_to_rov * dir * cfg.linear_speed,
            yaw_rate: 0.0,
        };
    }
    if l.axis == Axis::Z {
        let sign = if l.positive { 1.0 } else { -1.0 };
        return VelocityCommand {
            linear: Vec3::zeros(),
            yaw_rate: sign * cfg.yaw_rate,
        };
    }
    VelocityCommand::zero()
}
