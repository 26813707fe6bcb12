//! Clutched leader/follower pose mapping.
//!
//! When a clutch engages, the stylus pose `ᴴT_{s,a}` and end-effector pose
//! `ᴿᴼⱽT_{ee,a}` are stored as anchors together with the bridge
//! `ᵉᵉ'ᵃT_{s,a} = (ᴿᴼⱽT_{ee,a})⁻¹ · ᴿᴼⱽT_H · ᴴT_{s,a}`. Each later stylus pose is
//! reduced to its motion relative to the anchor, carried into the
//! end-effector anchor frame by conjugation with the bridge, and applied on
//! top of the end-effector anchor.

use crate::kinematics::Transform;
use crate::resolved_rate::DesiredPose;

use super::{Registration, StylusSample, TeleopError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmClutch {
    pub anchor_stylus: Transform,
    pub anchor_ee: Transform,
    pub bridge: Transform,
    /// Leader-to-follower scale on relative translations.
    pub scale: f64,
    pub active: bool,
}

impl ArmClutch {
    /// Registers the anchors for a new teleoperation session at 1:1 scale.
    pub fn begin(stylus: &StylusSample, current_ee: &Transform, reg: &Registration) -> Self {
        Self::begin_scaled(stylus, current_ee, reg, 1.0)
    }

    pub fn begin_scaled(
        stylus: &StylusSample,
        current_ee: &Transform,
        reg: &Registration,
        scale: f64,
    ) -> Self {
        let bridge = current_ee
            .inverse()
            .compose(&reg.rov_from_haptic)
            .compose(&stylus.pose);
        Self {
            anchor_stylus: stylus.pose,
            anchor_ee: *current_ee,
            bridge,
            scale,
            active: true,
        }
    }

    pub fn release(&mut self) {
        self.active = false;
    }

    fn ensure_active(&self) -> Result<(), TeleopError> {
        if self.active {
            Ok(())
        } else {
            Err(TeleopError::ClutchInactive)
        }
    }

    /// Stylus motion since the anchor, expressed in the anchor stylus frame.
    pub fn stylus_relative(&self, current: &StylusSample) -> Result<Transform, TeleopError> {
        self.ensure_active()?;
        Ok(self.anchor_stylus.inverse().compose(&current.pose))
    }

    /// Carries a relative stylus motion into the anchor end-effector frame by
    /// similarity with the bridge, after scaling its translation.
    pub fn map_relative(&self, rel: &Transform) -> Result<Transform, TeleopError> {
        self.ensure_active()?;
        let scaled = Transform::new(rel.rotation, rel.translation * self.scale);
        Ok(self
            .bridge
            .compose(&scaled)
            .compose(&self.bridge.inverse()))
    }

    pub fn desired_ee_pose(&self, current: &StylusSample) -> Result<DesiredPose, TeleopError> {
        let rel = self.stylus_relative(current)?;
        let mapped = self.map_relative(&rel)?;
        Ok(self.anchor_ee.compose(&mapped).renormalized())
    }
}
