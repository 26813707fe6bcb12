//! Session configuration file (TOML). Every key is optional.
//!
//! ```toml
//! tick_rate = 100.0        # Hz, one world step per tick
//! broadcast_rate = 20.0    # Hz, state snapshots
//! port = 8801
//! teleop_scale = 1.0       # stylus-to-arm translation scale
//! safety_timeout = 0.5     # s without samples before a clutch is dropped
//! left_chain = "arms/left.toml"   # relative to this file; bundled arm if absent
//! telemetry = "out/telemetry.csv"
//!
//! [registration.left]      # device base frame in the vehicle frame
//! translation = [0.0, 0.0, 0.0]
//! rotation_rpy = [1.5707963267948966, 0.0, -1.5707963267948966]
//!
//! [vehicle]                # dead_zone, linear_speed, yaw_rate
//! [rate_limits]            # v_max, v_min, w_max, w_min, pos_tolerance, ...
//! [buttons]                # simultaneity_window, retoggle_debounce
//! [sim]                    # vehicle_tau, joint_tau, disturbance, ...
//!
//! [[objects]]
//! id = 1
//! pose = { translation = [0.8, 0.0, -0.4], rotation_rpy = [0.0, 0.0, 0.0] }
//! half_extents = [0.05, 0.04, 0.03]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    default_left_arm, default_right_arm, load_chain_file, KinematicChain, PoseSpec, Vec3,
};
use crate::resolved_rate::RateLimits;
use crate::sim::{SceneObject, SimConfig};
use crate::teleop::{ButtonTiming, Device, Registration};
use crate::vehicle_teleop::VehicleTeleopConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Per-device base frames. An absent entry uses the exact desk axis
/// permutation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub left: Option<PoseSpec>,
    pub right: Option<PoseSpec>,
}

impl RegistrationConfig {
    fn resolve(spec: &Option<PoseSpec>, device: Device) -> Registration {
        spec.as_ref()
            .map(Registration::from_spec)
            .unwrap_or_else(|| Registration::default_for(device))
    }

    pub fn specs(&self) -> [PoseSpec; 2] {
        [Device::Left, Device::Right].map(|d| {
            let spec = if d == Device::Left { &self.left } else { &self.right };
            spec.clone().unwrap_or_else(|| {
                PoseSpec::from_transform(&Registration::default_for(d).rov_from_haptic)
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub id: u32,
    /// World pose of the box center.
    pub pose: PoseSpec,
    pub half_extents: [f64; 3],
    #[serde(default = "yes")]
    pub graspable: bool,
}

fn yes() -> bool {
    true
}

impl ObjectConfig {
    pub fn to_object(&self) -> SceneObject {
        SceneObject {
            id: self.id,
            pose: self.pose.to_transform(),
            half_extents: Vec3::from(self.half_extents),
            graspable: self.graspable,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub tick_rate: f64,
    pub broadcast_rate: f64,
    pub port: u16,
    pub teleop_scale: f64,
    pub safety_timeout: f64,
    pub registration: RegistrationConfig,
    pub vehicle: VehicleTeleopConfig,
    pub rate_limits: RateLimits,
    pub buttons: ButtonTiming,
    pub sim: SimConfig,
    pub left_chain: Option<PathBuf>,
    pub right_chain: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub telemetry: Option<PathBuf>,
    pub objects: Vec<ObjectConfig>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_rate: 100.0,
            broadcast_rate: 20.0,
            port: 8801,
            teleop_scale: 1.0,
            safety_timeout: 0.5,
            registration: RegistrationConfig::default(),
            vehicle: VehicleTeleopConfig::default(),
            rate_limits: RateLimits::default(),
            buttons: ButtonTiming::default(),
            sim: SimConfig::default(),
            left_chain: None,
            right_chain: None,
            scenario: None,
            telemetry: None,
            objects: Vec::new(),
        }
    }
}

impl SessionConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.left_chain,
            &mut cfg.right_chain,
            &mut cfg.scenario,
            &mut cfg.telemetry,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.tick_rate.is_finite() && self.tick_rate > 0.0) {
            return invalid(format!("tick_rate must be positive, got {}", self.tick_rate));
        }
        if !(self.broadcast_rate > 0.0 && self.broadcast_rate <= self.tick_rate) {
            return invalid(format!(
                "broadcast_rate must be in (0, tick_rate], got {}",
                self.broadcast_rate
            ));
        }
        if !(self.teleop_scale.is_finite() && self.teleop_scale > 0.0) {
            return invalid(format!("teleop_scale must be positive, got {}", self.teleop_scale));
        }
        if !(self.safety_timeout.is_finite() && self.safety_timeout > 0.0) {
            return invalid(format!("safety_timeout must be positive, got {}", self.safety_timeout));
        }
        let period = 1.0 / self.tick_rate;
        for (name, dt) in [("sim.dt", self.sim.dt), ("rate_limits.dt", self.rate_limits.dt)] {
            if (dt - period).abs() > 1e-12 {
                return invalid(format!("{name} = {dt} must equal 1 / tick_rate = {period}"));
            }
        }
        self.rate_limits
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sim.validate().map_err(ConfigError::Invalid)?;
        let v = &self.vehicle;
        if [v.dead_zone, v.linear_speed, v.yaw_rate].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return invalid("vehicle settings must be finite and non-negative".into());
        }
        let b = &self.buttons;
        if !(b.simultaneity_window >= 0.0 && b.retoggle_debounce >= 0.0) {
            return invalid("button timings must be non-negative".into());
        }
        for o in &self.objects {
            if o.half_extents.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                return invalid(format!("object {} needs positive half extents", o.id));
            }
        }
        Ok(())
    }

    /// Ticks between snapshots.
    pub fn broadcast_every(&self) -> u64 {
        (self.tick_rate / self.broadcast_rate).round().max(1.0) as u64
    }

    pub fn registrations(&self) -> [Registration; 2] {
        [
            RegistrationConfig::resolve(&self.registration.left, Device::Left),
            RegistrationConfig::resolve(&self.registration.right, Device::Right),
        ]
    }

    pub fn chains(&self) -> Result<[KinematicChain; 2], ConfigError> {
        let load = |p: &Option<PathBuf>, fallback: fn() -> KinematicChain| match p {
            Some(path) => load_chain_file(path).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(fallback()),
        };
        Ok([
            load(&self.left_chain, default_left_arm)?,
            load(&self.right_chain, default_right_arm)?,
        ])
    }

    pub fn objects(&self) -> Vec<SceneObject> {
        self.objects.iter().map(ObjectConfig::to_object).collect()
    }
}
