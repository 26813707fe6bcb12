//! Bimanual teleoperation stack for an underwater vehicle-manipulator system.
//!
//! Two 6-DoF arms are driven by resolved motion rate control toward poses
//! produced by clutched leader/follower mapping of two stylus devices; the
//! same devices pilot the vehicle. A deterministic fixed-step simulator
//! closes the loop and emits telemetry for offline error analysis.

pub mod analysis;
pub mod kinematics;
pub mod resolved_rate;
pub mod scenarios;
pub mod session;
pub mod sim;
pub mod teleop;
pub mod vehicle_teleop;
