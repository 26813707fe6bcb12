//! Six-joint serial chains: forward kinematics and the geometric Jacobian.
//!
//! Every quantity returned here is expressed in the vehicle frame `{ROV}`.
//! Joint `j` sits at `frame_j = base ∘ Π_{k≤j}(zero_config_k ∘ Rot(axis_k, q_k))`
//! and the end-effector is frame 6.

use nalgebra::{Matrix6, Vector6};

use super::transform::{axis_angle_rotation, Transform, Vec3, UNIT_AXIS_TOL};
use super::KinematicsError;

pub const JOINT_COUNT: usize = 6;

/// Joint positions in radians, or joint rates in rad/s.
pub type JointVector = Vector6<f64>;

/// Rows 0..3 map joint rates to linear velocity, rows 3..6 to angular velocity.
pub type Jacobian = Matrix6<f64>;

/// Slack applied when checking joint limits, so values clamped exactly onto
/// a limit never fail the check after round-off.
const LIMIT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.lower - LIMIT_SLACK && q <= self.upper + LIMIT_SLACK
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.lower, self.upper)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    /// Parent-frame to joint-frame transform at `q = 0`.
    pub zero_config: Transform,
    /// Unit rotation axis in the joint's own frame.
    pub axis: Vec3,
    pub limits: Option<JointLimits>,
}

/// Linear and angular velocity of a frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            linear: Vec3::new(v[0], v[1], v[2]),
            angular: Vec3::new(v[3], v[4], v[5]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    pub name: String,
    /// Fixed mount of the arm on the vehicle, `{ROV}` to the chain root.
    pub base: Transform,
    pub joints: [Joint; JOINT_COUNT],
}

/// Joint frames 1..=6 in `{ROV}` for one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainFrames {
    pub frames: [Transform; JOINT_COUNT],
}

impl ChainFrames {
    pub fn ee(&self) -> &Transform {
        &self.frames[JOINT_COUNT - 1]
    }
}

impl KinematicChain {
    /// Builds a chain, checking that every axis is unit length and every
    /// limit interval is ordered.
    pub fn new(
        name: impl Into<String>,
        base: Transform,
        joints: Vec<Joint>,
    ) -> Result<Self, KinematicsError> {
        let joints: [Joint; JOINT_COUNT] =
            joints
                .try_into()
                .map_err(|j: Vec<Joint>| KinematicsError::Validation(format!(
                    "expected {JOINT_COUNT} joints, found {}",
                    j.len()
                )))?;
        if !base.is_finite() {
            return Err(KinematicsError::Validation("base transform is not finite".into()));
        }
        for (i, joint) in joints.iter().enumerate() {
            let n = joint.axis.norm();
            if !n.is_finite() || (n - 1.0).abs() > UNIT_AXIS_TOL {
                return Err(KinematicsError::Validation(format!(
                    "joint {} axis has norm {n}",
                    i + 1
                )));
            }
            if !joint.zero_config.is_finite() {
                return Err(KinematicsError::Validation(format!(
                    "joint {} zero configuration is not finite",
                    i + 1
                )));
            }
            if let Some(l) = joint.limits {
                if !(l.lower.is_finite() && l.upper.is_finite() && l.lower <= l.upper) {
                    return Err(KinematicsError::Validation(format!(
                        "joint {} limits [{}, {}] are not an ordered interval",
                        i + 1,
                        l.lower,
                        l.upper
                    )));
                }
            }
        }
        let mut joints = joints;
        for j in joints.iter_mut() {
            j.axis = j.axis.normalize();
        }
        Ok(Self {
            name: name.into(),
            base,
            joints,
        })
    }

    pub fn check_limits(&self, q: &JointVector) -> Result<(), KinematicsError> {
        for (i, joint) in self.joints.iter().enumerate() {
            if !q[i].is_finite() {
                return Err(KinematicsError::NonFinite);
            }
            if let Some(l) = joint.limits {
                if !l.contains(q[i]) {
                    return Err(KinematicsError::JointLimit {
                        joint: i + 1,
                        value: q[i],
                        lower: l.lower,
                        upper: l.upper,
                    });
                }
            }
        }
        Ok(())
    }

    /// Clamps `q` into the joint limits; returns whether anything moved.
    pub fn clamp_to_limits(&self, q: &mut JointVector) -> bool {
        let mut clamped = false;
        for (i, joint) in self.joints.iter().enumerate() {
            if let Some(l) = joint.limits {
                let c = l.clamp(q[i]);
                if c != q[i] {
                    q[i] = c;
                    clamped = true;
                }
            }
        }
        clamped
    }

    pub fn forward_kinematics(&self, q: &JointVector) -> Result<ChainFrames, KinematicsError> {
        self.check_limits(q)?;
        Ok(self.frames_unchecked(q))
    }

    /// Forward kinematics without the joint-limit check.
    pub fn frames_unchecked(&self, q: &JointVector) -> ChainFrames {
        let mut frames = [Transform::identity(); JOINT_COUNT];
        let mut acc = self.base;
        for (i, joint) in self.joints.iter().enumerate() {
            let rot = axis_angle_rotation(&joint.axis, q[i])
                .expect("axes are validated unit vectors");
            acc = acc
                .compose(&joint.zero_config)
                .compose(&Transform::from_rotation(rot))
                .renormalized();
            frames[i] = acc;
        }
        ChainFrames { frames }
    }

    pub fn end_effector(&self, q: &JointVector) -> Result<Transform, KinematicsError> {
        Ok(*self.forward_kinematics(q)?.ee())
    }

    /// Geometric Jacobian: column `j` is `[ŝ_j × (p − p_j); ŝ_j]`.
    pub fn jacobian(&self, q: &JointVector) -> Result<Jacobian, KinematicsError> {
        self.check_limits(q)?;
        Ok(self.jacobian_from_frames(&self.frames_unchecked(q)))
    }

    pub fn jacobian_from_frames(&self, fk: &ChainFrames) -> Jacobian {
        let p = fk.ee().translation;
        let mut jac = Jacobian::zeros();
        for (j, (frame, joint)) in fk.frames.iter().zip(self.joints.iter()).enumerate() {
            let s = frame.rotation * joint.axis;
            let lin = s.cross(&(p - frame.translation));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&s);
        }
        jac
    }

    /// Sum of absolute link offsets; an upper bound on the distance from the
    /// chain root to the end-effector.
    pub fn reach_bound(&self) -> f64 {
        self.joints
            .iter()
            .skip(1)
            .map(|j| j.zero_config.translation.norm())
            .sum()
    }

    /// First joint position in `{ROV}`, independent of `q`.
    pub fn shoulder(&self) -> Vec3 {
        self.base.compose(&self.joints[0].zero_config).translation
    }
}
