//! Leader stylus handling: clutched pose mapping and button semantics.

mod buttons;
mod clutch;

pub use buttons::{ButtonTiming, DeviceButtons};
pub use clutch::ArmClutch;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{PoseSpec, Rotation, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Left,
    Right,
}

impl Device {
    pub const BOTH: [Device; 2] = [Device::Left, Device::Right];

    /// Arm index driven by this device.
    pub fn index(self) -> usize {
        match self {
            Device::Left => 0,
            Device::Right => 1,
        }
    }

    pub fn other(self) -> Device {
        match self {
            Device::Left => Device::Right,
            Device::Right => Device::Left,
        }
    }
}

impl std::fmt::Display for Device {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Device::Left => "left",
            Device::Right => "right",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StylusSample {
    pub device: Device,
    /// Stylus pose in the device's haptic base frame `{H}`.
    pub pose: Transform,
    /// Proximal button.
    pub button_manip: bool,
    /// Distal button.
    pub button_vehicle: bool,
    /// Client clock, s. Only used to order samples of one device.
    pub timestamp: f64,
}

/// Fixed pose of a haptic base frame in `{ROV}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Registration {
    pub rov_from_haptic: Transform,
}

impl Registration {
    /// Axis permutation of a desk stylus (x right, y up, z toward the
    /// operator) into `{ROV}` (x forward, y left, z up).
    pub fn desk_axes() -> Rotation {
        Rotation::from_matrix_unchecked(Matrix3::new(
            0.0, 0.0, -1.0, //
            -1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0,
        ))
    }

    pub fn default_for(_device: Device) -> Self {
        Self {
            rov_from_haptic: Transform::from_rotation(Self::desk_axes()),
        }
    }

    pub fn from_spec(spec: &PoseSpec) -> Self {
        Self {
            rov_from_haptic: spec.to_transform(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "device", rename_all = "snake_case")]
pub enum TeleopEvent {
    ClutchEngaged(Device),
    ClutchReleased(Device),
    GripperToggled(Device),
    VehicleModeEntered,
    VehicleModeExited,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TeleopError {
    #[error("clutch is not engaged")]
    ClutchInactive,
    #[error("{device} sample at t={got} is older than the last accepted t={last}")]
    OutOfOrderTimestamp { device: Device, last: f64, got: f64 },
    #[error("sample timestamp is not finite")]
    NonFiniteTimestamp,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{orthonormality_defect, Vec3};

    #[test]
    fn desk_axes_are_a_proper_rotation() {
        let r = Registration::desk_axes();
        assert!(orthonormality_defect(&r) < 1e-15);
        // Pushing the stylus away from the operator drives forward.
        assert_eq!(r * -Vec3::z(), Vec3::x());
        assert_eq!(r * Vec3::y(), Vec3::z());
        assert_eq!(r * Vec3::x(), -Vec3::y());
    }

    #[test]
    fn event_wire_form() {
        let json = serde_json::to_string(&TeleopEvent::GripperToggled(Device::Right)).unwrap();
        assert_eq!(json, r#"{"event":"gripper_toggled","device":"right"}"#);
        let json = serde_json::to_string(&TeleopEvent::VehicleModeEntered).unwrap();
        assert_eq!(json, r#"{"event":"vehicle_mode_entered"}"#);
    }
}
