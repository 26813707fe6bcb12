use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::kinematics::{Rotation, Transform, Vec3};
use crate::vehicle_teleop::VelocityCommand;

/// Planar-attitude vehicle: roll and pitch are held at zero by construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// World frame, m.
    pub position: Vec3,
    /// Heading about world z, wrapped to (-π, π].
    pub yaw: f64,
    /// Body-frame velocity, m/s.
    pub velocity: Vec3,
    pub yaw_rate: f64,
}

impl VehicleState {
    /// `world ← {ROV}`.
    pub fn pose(&self) -> Transform {
        Transform::new(
            Rotation::from_axis_angle(&Vec3::z_axis(), self.yaw),
            self.position,
        )
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// First-order velocity tracking with time constant `tau`, then
/// semi-implicit integration of the body velocity rotated by yaw.
pub fn step_vehicle(state: &VehicleState, cmd: &VelocityCommand, tau: f64, dt: f64) -> VehicleState {
    let alpha = (dt / tau).min(1.0);
    let velocity = state.velocity + (cmd.linear - state.velocity) * alpha;
    let yaw_rate = state.yaw_rate + (cmd.yaw_rate - state.yaw_rate) * alpha;
    let heading = Rotation::from_axis_angle(&Vec3::z_axis(), state.yaw);
    VehicleState {
        position: state.position + heading * velocity * dt,
        yaw: wrap_angle(state.yaw + yaw_rate * dt),
        velocity,
        yaw_rate,
    }
}
