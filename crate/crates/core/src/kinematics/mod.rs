//! Rigid transforms, serial-chain forward kinematics and geometric Jacobians.

mod chain;
mod config;
mod transform;

pub use chain::{
    ChainFrames, Jacobian, Joint, JointLimits, JointVector, KinematicChain, Twist, JOINT_COUNT,
};
pub use config::{
    chain_spec, load_chain, load_chain_file, serialize_chain, ChainSpec, JointSpec, PoseSpec,
};
pub use transform::{
    axis_angle_rotation, orthonormality_defect, project_to_rotation, rotation_angle,
    rotation_from_rpy, rotation_to_rpy, Rotation, Transform, Vec3, ORTHONORMAL_TOL,
    UNIT_AXIS_TOL,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("rotation axis must be unit length (norm {norm})")]
    NonUnitAxis { norm: f64 },
    #[error("joint {joint} at {value} rad is outside [{lower}, {upper}]")]
    JointLimit {
        joint: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite value")]
    NonFinite,
    #[error("chain config parse error: {0}")]
    Parse(String),
    #[error("invalid chain: {0}")]
    Validation(String),
}

pub const DEFAULT_LEFT_ARM: &str = include_str!("../../assets/left_arm.toml");
pub const DEFAULT_RIGHT_ARM: &str = include_str!("../../assets/right_arm.toml");

pub fn default_left_arm() -> KinematicChain {
    load_chain(DEFAULT_LEFT_ARM).expect("bundled left arm is valid")
}

pub fn default_right_arm() -> KinematicChain {
    load_chain(DEFAULT_RIGHT_ARM).expect("bundled right arm is valid")
}

/// Elbow-down working posture of the bundled arms, gripper roughly level.
pub fn home_configuration() -> JointVector {
    JointVector::new(0.0, 0.35, -1.4, 0.0, 1.05, 0.0)
}
