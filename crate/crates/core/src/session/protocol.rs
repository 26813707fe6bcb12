//! WebSocket message schema. One JSON object per frame, each carrying
//! `"v": 1` and a `"type"` tag.
//!
//! Client to server:
//!
//! ```json
//! {"v":1,"type":"stylus","device":"left","position":[0.0,0.0,0.0],
//!  "orientation":[1.0,0.0,0.0,0.0],"button_manip":false,
//!  "button_vehicle":false,"timestamp":12.5}
//! {"v":1,"type":"mode_query"}
//! {"v":1,"type":"config_query"}
//! ```
//!
//! `position` is meters in the device base frame, `orientation` is a
//! `[w, x, y, z]` quaternion (renormalized on ingest) and `timestamp` is the
//! client clock in seconds, used only to order samples from one device.
//!
//! Server to client: `state_snapshot`, `event`, `mode`, `config` and
//! `error`, see [`OutboundMessage`].

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::kinematics::{ChainSpec, PoseSpec, Transform};
use crate::sim::{GraspStatus, StepFlags};
use crate::teleop::{Device, StylusSample, TeleopEvent};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {got}, expected {PROTOCOL_VERSION}")]
    Version { got: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StylusWire {
    pub device: Device,
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
    pub button_manip: bool,
    pub button_vehicle: bool,
    pub timestamp: f64,
}

impl StylusWire {
    pub fn from_sample(s: &StylusSample) -> Self {
        Self {
            device: s.device,
            position: s.pose.translation.into(),
            orientation: s.pose.quaternion_wxyz(),
            button_manip: s.button_manip,
            button_vehicle: s.button_vehicle,
            timestamp: s.timestamp,
        }
    }

    pub fn to_sample(&self) -> Result<StylusSample, ProtocolError> {
        let pose = Transform::from_position_quaternion(self.position, self.orientation)
            .map_err(|_| ProtocolError::Malformed("non-finite position or zero quaternion".into()))?;
        Ok(StylusSample {
            device: self.device,
            pose,
            button_manip: self.button_manip,
            button_vehicle: self.button_vehicle,
            timestamp: self.timestamp,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InboundMessage {
    Stylus(StylusWire),
    ModeQuery,
    ConfigQuery,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseWire {
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

impl PoseWire {
    pub fn from_transform(t: &Transform) -> Self {
        Self {
            position: t.translation.into(),
            orientation: t.quaternion_wxyz(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSnapshot {
    pub device: Device,
    pub q: [f64; 6],
    pub q_cmd: [f64; 6],
    /// Actual end-effector pose in the vehicle frame.
    pub ee: PoseWire,
    pub ee_cmd: PoseWire,
    /// Pose target while the arm has one.
    pub desired: Option<PoseWire>,
    pub clutched: bool,
    pub gripper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub position: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub yaw_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSnapshot {
    pub id: u32,
    pub pose: PoseWire,
    pub half_extents: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    /// Strictly increasing per session.
    pub seq: u64,
    pub tick: u64,
    pub time: f64,
    /// Same encoding as the telemetry `mode` column.
    pub mode: String,
    pub vehicle: VehicleSnapshot,
    pub arms: Vec<ArmSnapshot>,
    pub objects: Vec<ObjectSnapshot>,
    pub grasp: GraspStatus,
    /// Conditions raised since the previous snapshot.
    pub flags: StepFlags,
    pub dropped_samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigInfo {
    pub tick_rate: f64,
    pub broadcast_rate: f64,
    pub chains: Vec<ChainSpec>,
    /// Device base frame in the vehicle frame, left then right.
    pub registrations: Vec<PoseSpec>,
    pub teleop_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutboundMessage {
    StateSnapshot(Box<StateSnapshot>),
    Event {
        tick: u64,
        #[serde(flatten)]
        event: TeleopEvent,
    },
    Mode {
        tick: u64,
        mode: String,
    },
    Config(Box<ConfigInfo>),
    Error {
        message: String,
    },
}

fn with_version<T: Serialize>(body: &T) -> Value {
    let mut v = serde_json::to_value(body).expect("protocol types always serialize");
    if let Value::Object(map) = &mut v {
        map.insert("v".into(), Value::from(PROTOCOL_VERSION));
    }
    v
}

fn strip_version(text: &str) -> Result<Value, ProtocolError> {
    let mut v: Value =
        serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let Value::Object(map) = &mut v else {
        return Err(ProtocolError::Malformed("expected a JSON object".into()));
    };
    match map.remove("v") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION as u64) => Ok(v),
        Some(Value::Number(n)) => Err(ProtocolError::Version {
            got: n.as_u64().unwrap_or(0),
        }),
        _ => Err(ProtocolError::Malformed("missing version field \"v\"".into())),
    }
}

impl InboundMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let v = strip_version(text)?;
        serde_json::from_value(v).map_err(|e| ProtocolError::Malformed(e.to_string()))
    }

    pub fn to_value(&self) -> Value {
        with_version(self)
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }
}

impl OutboundMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let v = strip_version(text)?;
        serde_json::from_value(v).map_err(|e| ProtocolError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        with_version(self).to_string()
    }
}
