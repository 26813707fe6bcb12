//! Deterministic fixed-step world: vehicle, two arms with grippers, and boxes
//! that can be caged between the grippers.

mod grasp;
mod manipulator;
pub mod telemetry;
mod vehicle;

pub use grasp::{
    cage_axis, grasp_check, midpoint_frame, Attachment, GraspParams, GraspState, GraspStatus,
    GripperPair, SceneObject,
};
pub use manipulator::ManipulatorSimState;
pub use telemetry::{ArmActivity, ArmTelemetry, Mode, PoseSample, SystemMode, TelemetryRecord};
pub use vehicle::{step_vehicle, wrap_angle, VehicleState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{home_configuration, KinematicChain, Transform, Vec3, JOINT_COUNT};
use crate::resolved_rate::{rmrc_step, DesiredPose, RateLimits};
use crate::vehicle_teleop::VelocityCommand;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Vehicle velocity time constant, s.
    pub vehicle_tau: f64,
    /// Joint tracking time constant, s.
    pub joint_tau: f64,
    /// Steady-state joint offset from the command, rad.
    pub disturbance: [f64; JOINT_COUNT],
    /// Gripper open-fraction slew, 1/s.
    pub gripper_rate: f64,
    pub grasp: GraspParams,
    /// Step, s.
    pub dt: f64,
    /// Half-width of uniform per-step joint noise, rad. Zero disables it.
    pub joint_noise: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            vehicle_tau: 0.5,
            joint_tau: 0.15,
            disturbance: [0.0, -0.02, -0.008, 0.0, 0.0, 0.0],
            gripper_rate: 2.0,
            grasp: GraspParams::default(),
            dt: 0.01,
            joint_noise: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("vehicle_tau", self.vehicle_tau),
            ("joint_tau", self.joint_tau),
            ("gripper_rate", self.gripper_rate),
            ("dt", self.dt),
            ("cage_radius", self.grasp.cage_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.joint_noise.is_finite() && self.joint_noise >= 0.0) {
            return Err(format!("joint_noise must be non-negative, got {}", self.joint_noise));
        }
        if self.disturbance.iter().any(|d| !d.is_finite()) {
            return Err("disturbance must be finite".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub step_index: u64,
    /// `step_index · dt`, s.
    pub time: f64,
    pub vehicle: VehicleState,
    pub arms: [ManipulatorSimState; 2],
    pub objects: Vec<SceneObject>,
    pub grasp: GraspState,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInputs {
    /// Per-arm pose targets in `{ROV}`.
    pub arm_targets: [Option<DesiredPose>; 2],
    pub vehicle_cmd: VelocityCommand,
    pub gripper_toggles: [bool; 2],
    /// Recorded in telemetry; does not affect the dynamics.
    pub mode: Mode,
}

/// Conditions raised during a step. The step itself always completes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    pub joint_limited: [bool; 2],
    pub damped: [bool; 2],
    pub non_finite: bool,
}

impl StepFlags {
    pub fn any(&self) -> bool {
        self.joint_limited.iter().any(|b| *b) || self.damped.iter().any(|b| *b) || self.non_finite
    }

    pub fn merge(&mut self, other: &StepFlags) {
        for i in 0..2 {
            self.joint_limited[i] |= other.joint_limited[i];
            self.damped[i] |= other.damped[i];
        }
        self.non_finite |= other.non_finite;
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub chains: [KinematicChain; 2],
    pub rate_limits: RateLimits,
    pub config: SimConfig,
    pub state: WorldState,
    rng: ChaCha8Rng,
}

impl World {
    /// Vehicle at the origin, both arms settled at the home configuration
    /// with grippers closed.
    pub fn new(
        chains: [KinematicChain; 2],
        rate_limits: RateLimits,
        config: SimConfig,
        objects: Vec<SceneObject>,
    ) -> Self {
        let arms = [0, 1].map(|i| {
            ManipulatorSimState::settled(&chains[i], home_configuration(), config.disturbance)
        });
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            chains,
            rate_limits,
            config,
            state: WorldState {
                step_index: 0,
                time: 0.0,
                vehicle: VehicleState::default(),
                arms,
                objects,
                grasp: GraspState::default(),
            },
            rng,
        }
    }

    /// End-effector pose of arm `i` in `{ROV}` for its commanded joints.
    pub fn ee_cmd(&self, i: usize) -> Transform {
        self.chains[i].frames_unchecked(&self.state.arms[i].q_cmd).ee().to_owned()
    }

    /// End-effector pose of arm `i` in `{ROV}` for its actual joints.
    pub fn ee_actual(&self, i: usize) -> Transform {
        self.chains[i].frames_unchecked(&self.state.arms[i].q).ee().to_owned()
    }

    pub fn gripper_pair(&self) -> GripperPair {
        let world_from_rov = self.state.vehicle.pose();
        GripperPair {
            positions: [0, 1].map(|i| world_from_rov.transform_point(&self.ee_actual(i).translation)),
            openings: [self.state.arms[0].gripper, self.state.arms[1].gripper],
        }
    }

    /// Midpoint frame between the grippers, z kept near the vehicle's up axis.
    pub fn midpoint(&self, pair: &GripperPair) -> Transform {
        let heading = self.state.vehicle.pose().rotation;
        midpoint_frame(pair, &Vec3::z(), &(heading * Vec3::x()))
    }

    pub fn record(&self, mode: Mode, vehicle_cmd: VelocityCommand) -> TelemetryRecord {
        let arms = [0, 1].map(|i| ArmTelemetry {
            q_cmd: self.state.arms[i].q_cmd,
            q: self.state.arms[i].q,
            ee_cmd: PoseSample::from_transform(&self.ee_cmd(i)),
            ee_actual: PoseSample::from_transform(&self.ee_actual(i)),
        });
        TelemetryRecord {
            time: self.state.time,
            arms,
            grippers: [self.state.arms[0].gripper, self.state.arms[1].gripper],
            vehicle_position: self.state.vehicle.position,
            vehicle_yaw: self.state.vehicle.yaw,
            vehicle_cmd,
            grasp: self.state.grasp.status(),
            mode,
        }
    }

    /// Advances by one `dt`: rate control on the commands, joint tracking,
    /// vehicle, grippers, then the grasp.
    pub fn step(&mut self, inputs: &StepInputs) -> (TelemetryRecord, StepFlags) {
        let mut flags = StepFlags::default();
        let cfg = self.config.clone();

        for i in 0..2 {
            if let Some(target) = &inputs.arm_targets[i] {
                if target.is_finite() {
                    let step = rmrc_step(&self.chains[i], &self.state.arms[i].q_cmd, target, &self.rate_limits);
                    self.state.arms[i].q_cmd = step.q_next;
                    flags.joint_limited[i] |= step.limited;
                    flags.damped[i] |= step.damped;
                } else {
                    flags.non_finite = true;
                }
            }
            let mut noise = [0.0; JOINT_COUNT];
            if cfg.joint_noise > 0.0 {
                for n in noise.iter_mut() {
                    *n = self.rng.random_range(-cfg.joint_noise..=cfg.joint_noise);
                }
            }
            flags.joint_limited[i] |=
                self.state.arms[i].step_joints(&self.chains[i], cfg.joint_tau, cfg.dt, &noise);
        }

        let cmd = if inputs.vehicle_cmd.linear.iter().all(|v| v.is_finite())
            && inputs.vehicle_cmd.yaw_rate.is_finite()
        {
            inputs.vehicle_cmd
        } else {
            flags.non_finite = true;
            VelocityCommand::zero()
        };
        self.state.vehicle = step_vehicle(&self.state.vehicle, &cmd, cfg.vehicle_tau, cfg.dt);

        for i in 0..2 {
            if inputs.gripper_toggles[i] {
                self.state.arms[i].toggle_gripper();
            }
            self.state.arms[i].step_gripper(cfg.gripper_rate, cfg.dt);
        }

        let pair = self.gripper_pair();
        let mid = self.midpoint(&pair);
        self.state.grasp = grasp_check(&self.state.grasp, &mut self.state.objects, &pair, &mid, &cfg.grasp);

        self.state.step_index += 1;
        self.state.time = self.state.step_index as f64 * cfg.dt;
        (self.record(inputs.mode, cmd), flags)
    }
}
