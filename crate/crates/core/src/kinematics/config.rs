//! TOML chain-config files.
//!
//! ```toml
//! name = "left"
//! [base]
//! translation = [0.25, 0.15, -0.2]
//! rotation_rpy = [0.0, 0.0, 0.0]
//!
//! [[joints]]
//! axis = [0.0, 0.0, 1.0]
//! limits = [-2.8, 2.8]
//! zero_config = { translation = [0.0, 0.0, -0.15], rotation_rpy = [0.0, 0.0, 0.0] }
//! ```
//!
//! Angles are radians, lengths meters, rotations are roll/pitch/yaw applied
//! as `Rz·Ry·Rx`. Exactly six `[[joints]]` entries are required.

use serde::{Deserialize, Serialize};

use super::chain::{Joint, JointLimits, KinematicChain};
use super::transform::{rotation_from_rpy, rotation_to_rpy, Transform, Vec3};
use super::KinematicsError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation_rpy: [f64; 3],
}

impl PoseSpec {
    pub fn to_transform(&self) -> Transform {
        let [r, p, y] = self.rotation_rpy;
        Transform::new(rotation_from_rpy(r, p, y), Vec3::from(self.translation))
    }

    pub fn from_transform(t: &Transform) -> Self {
        Self {
            translation: t.translation.into(),
            rotation_rpy: rotation_to_rpy(&t.rotation),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
    pub zero_config: PoseSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub name: String,
    pub base: PoseSpec,
    pub joints: Vec<JointSpec>,
}

pub fn load_chain(text: &str) -> Result<KinematicChain, KinematicsError> {
    let spec: ChainSpec =
        toml::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
    let joints = spec
        .joints
        .iter()
        .map(|j| Joint {
            zero_config: j.zero_config.to_transform(),
            axis: Vec3::from(j.axis),
            limits: j.limits.map(|[lo, hi]| JointLimits::new(lo, hi)),
        })
        .collect();
    KinematicChain::new(spec.name, spec.base.to_transform(), joints)
}

pub fn load_chain_file(path: &std::path::Path) -> Result<KinematicChain, KinematicsError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KinematicsError::Parse(format!("{}: {e}", path.display())))?;
    load_chain(&text)
}

/// File-level description of a chain.
pub fn chain_spec(chain: &KinematicChain) -> ChainSpec {
    ChainSpec {
        name: chain.name.clone(),
        base: PoseSpec::from_transform(&chain.base),
        joints: chain
            .joints
            .iter()
            .map(|j| JointSpec {
                axis: j.axis.into(),
                limits: j.limits.map(|l| [l.lower, l.upper]),
                zero_config: PoseSpec::from_transform(&j.zero_config),
            })
            .collect(),
    }
}

pub fn serialize_chain(chain: &KinematicChain) -> String {
    toml::to_string(&chain_spec(chain)).expect("chain specs always serialize")
}
