use serde::{Deserialize, Serialize};

use crate::kinematics::{JointVector, KinematicChain, JOINT_COUNT};

/// Simulated arm: joints follow their commands through a first-order lag and
/// settle offset by a constant per-joint disturbance (load sag).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorSimState {
    /// Actual joint positions.
    pub q: JointVector,
    /// Commanded joint positions.
    pub q_cmd: JointVector,
    /// 0 closed, 1 fully open.
    pub gripper: f64,
    pub gripper_target_open: bool,
    /// Offset added to the command at steady state, rad.
    pub disturbance: [f64; JOINT_COUNT],
}

impl ManipulatorSimState {
    /// An arm resting at `q_cmd` with the disturbance already settled.
    pub fn settled(chain: &KinematicChain, q_cmd: JointVector, disturbance: [f64; JOINT_COUNT]) -> Self {
        let mut q = q_cmd + JointVector::from(disturbance);
        chain.clamp_to_limits(&mut q);
        Self {
            q,
            q_cmd,
            gripper: 0.0,
            gripper_target_open: false,
            disturbance,
        }
    }

    pub fn set_gripper(&mut self, open: bool) {
        self.gripper_target_open = open;
    }

    pub fn toggle_gripper(&mut self) {
        self.gripper_target_open = !self.gripper_target_open;
    }

    /// Slews the gripper opening toward its target at `rate` per second.
    pub fn step_gripper(&mut self, rate: f64, dt: f64) {
        let target = if self.gripper_target_open { 1.0 } else { 0.0 };
        let stride = rate * dt;
        let gap = target - self.gripper;
        self.gripper = if gap.abs() <= stride + 1e-12 {
            target
        } else {
            self.gripper + stride * gap.signum()
        };
    }

    /// Moves `q` toward `q_cmd + disturbance + noise`; returns whether a joint
    /// limit clamped the result.
    pub fn step_joints(
        &mut self,
        chain: &KinematicChain,
        tau: f64,
        dt: f64,
        noise: &[f64; JOINT_COUNT],
    ) -> bool {
        let alpha = (dt / tau).min(1.0);
        for j in 0..JOINT_COUNT {
            let goal = self.q_cmd[j] + self.disturbance[j];
            self.q[j] += (goal - self.q[j]) * alpha + noise[j];
        }
        chain.clamp_to_limits(&mut self.q)
    }
}
