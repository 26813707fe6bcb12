//! Session loop: stylus ingest, button and mode handling, arm and vehicle
//! commands, world stepping, snapshots, and input-log record/replay.
//!
//! The loop is single-threaded and owns the world. Callers feed messages
//! with [`Session::ingest`] between calls to [`Session::tick`]; the server
//! tick counter is the only clock that affects behavior.

pub mod config;
pub mod log;
pub mod protocol;

pub use config::{ConfigError, SessionConfig};
pub use log::{InputLog, LogEntry, LogError, LogWriter};
pub use protocol::{InboundMessage, OutboundMessage, ProtocolError, StateSnapshot};

use crate::kinematics::{chain_spec, KinematicChain, Vec3};
use crate::resolved_rate::DesiredPose;
use crate::sim::{
    ArmActivity, Mode, StepFlags, StepInputs, SystemMode, TelemetryRecord, World,
};
use crate::teleop::{ArmClutch, Device, DeviceButtons, Registration, StylusSample, TeleopEvent};
use crate::vehicle_teleop::{displacement_vector, vehicle_command, VelocityCommand};

use protocol::{
    ArmSnapshot, ConfigInfo, ObjectSnapshot, PoseWire, StylusWire, VehicleSnapshot,
};

/// Result of one tick.
#[derive(Clone, Debug)]
pub struct TickOutput {
    pub record: TelemetryRecord,
    pub flags: StepFlags,
    /// Events raised during the tick (safety stop, vehicle mode changes).
    pub events: Vec<OutboundMessage>,
    pub snapshot: Option<OutboundMessage>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub accepted_samples: u64,
    pub dropped_samples: u64,
    pub malformed_messages: u64,
    pub safety_stops: u64,
}

pub struct Session {
    config: SessionConfig,
    world: World,
    registrations: [Registration; 2],
    buttons: [DeviceButtons; 2],
    latest: [Option<StylusSample>; 2],
    last_sample_tick: [Option<u64>; 2],
    clutches: [Option<ArmClutch>; 2],
    targets: [Option<DesiredPose>; 2],
    vehicle_anchor: Option<[Vec3; 2]>,
    gripper_toggles: [bool; 2],
    tick: u64,
    seq: u64,
    pending_flags: StepFlags,
    stats: SessionStats,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let chains = config.chains()?;
        Ok(Self::with_chains(config, chains))
    }

    pub fn with_chains(config: SessionConfig, chains: [KinematicChain; 2]) -> Self {
        let world = World::new(chains, config.rate_limits, config.sim.clone(), config.objects());
        Self {
            registrations: config.registrations(),
            buttons: Device::BOTH.map(DeviceButtons::new),
            latest: [None; 2],
            last_sample_tick: [None; 2],
            clutches: [None; 2],
            targets: [None; 2],
            vehicle_anchor: None,
            gripper_toggles: [false; 2],
            tick: 0,
            seq: 0,
            pending_flags: StepFlags::default(),
            stats: SessionStats::default(),
            config,
            world,
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    pub fn targets(&self) -> [Option<DesiredPose>; 2] {
        self.targets
    }

    pub fn vehicle_mode(&self) -> bool {
        self.vehicle_anchor.is_some()
    }

    pub fn mode(&self) -> Mode {
        let arms = [0, 1].map(|i| {
            if self.clutches[i].is_some() {
                ArmActivity::Clutched
            } else if self.targets[i].is_some() {
                ArmActivity::Tracking
            } else {
                ArmActivity::Idle
            }
        });
        let system = if self.vehicle_mode() {
            SystemMode::Vehicle
        } else if self.clutches.iter().any(Option::is_some) {
            SystemMode::Arm
        } else {
            SystemMode::Idle
        };
        Mode { system, arms }
    }

    /// Parses and applies one text frame. Returns replies for the sender.
    pub fn ingest_text(&mut self, text: &str) -> (Option<InboundMessage>, Vec<OutboundMessage>) {
        match InboundMessage::parse(text) {
            Ok(msg) => {
                let replies = self.ingest(&msg);
                (Some(msg), replies)
            }
            Err(e) => {
                self.stats.malformed_messages += 1;
                (None, vec![OutboundMessage::Error { message: e.to_string() }])
            }
        }
    }

    /// Applies one message. Button edges take effect immediately; poses are
    /// used at the next tick (latest sample per device wins).
    pub fn ingest(&mut self, msg: &InboundMessage) -> Vec<OutboundMessage> {
        match msg {
            InboundMessage::ModeQuery => vec![OutboundMessage::Mode {
                tick: self.tick,
                mode: self.mode().to_string(),
            }],
            InboundMessage::ConfigQuery => vec![OutboundMessage::Config(Box::new(self.config_info()))],
            InboundMessage::Stylus(wire) => self.ingest_stylus(wire),
        }
    }

    fn ingest_stylus(&mut self, wire: &StylusWire) -> Vec<OutboundMessage> {
        let sample = match wire.to_sample() {
            Ok(s) => s,
            Err(e) => {
                self.stats.malformed_messages += 1;
                return vec![OutboundMessage::Error { message: e.to_string() }];
            }
        };
        let i = sample.device.index();
        let events = match self.buttons[i].update(&sample, &self.config.buttons) {
            Ok(events) => events,
            Err(_) => {
                self.stats.dropped_samples += 1;
                return Vec::new();
            }
        };
        self.stats.accepted_samples += 1;
        self.latest[i] = Some(sample);
        self.last_sample_tick[i] = Some(self.tick);
        events
            .into_iter()
            .map(|e| self.apply_event(e, Some(&sample)))
            .collect()
    }

    fn apply_event(&mut self, event: TeleopEvent, sample: Option<&StylusSample>) -> OutboundMessage {
        match event {
            TeleopEvent::ClutchEngaged(d) => {
                let i = d.index();
                if let Some(s) = sample {
                    // Anchor on the commanded pose so engagement is bumpless.
                    let ee = self.world.ee_cmd(i);
                    self.clutches[i] = Some(ArmClutch::begin_scaled(
                        s,
                        &ee,
                        &self.registrations[i],
                        self.config.teleop_scale,
                    ));
                    self.targets[i] = Some(ee);
                }
            }
            TeleopEvent::ClutchReleased(d) => {
                self.clutches[d.index()] = None;
            }
            TeleopEvent::GripperToggled(d) => {
                self.gripper_toggles[d.index()] = true;
            }
            TeleopEvent::VehicleModeEntered | TeleopEvent::VehicleModeExited => {}
        }
        OutboundMessage::Event { tick: self.tick, event }
    }

    fn safety_stop(&mut self, events: &mut Vec<OutboundMessage>) {
        let timeout = (self.config.safety_timeout * self.config.tick_rate).ceil() as u64;
        for d in Device::BOTH {
            let i = d.index();
            let held = self.buttons[i].clutched() || self.buttons[i].vehicle_held();
            let stale = self.last_sample_tick[i].is_none_or(|t| self.tick - t >= timeout);
            if held && stale {
                self.stats.safety_stops += 1;
                for e in self.buttons[i].force_release() {
                    events.push(self.apply_event(e, None));
                }
            }
        }
    }

    fn update_vehicle_mode(&mut self, events: &mut Vec<OutboundMessage>) {
        let both = self.buttons.iter().all(DeviceButtons::vehicle_held);
        match (self.vehicle_anchor.is_some(), both) {
            (false, true) => {
                let (Some(l), Some(r)) = (self.latest[0], self.latest[1]) else {
                    return;
                };
                self.vehicle_anchor = Some([l.pose.translation, r.pose.translation]);
                events.push(self.apply_event(TeleopEvent::VehicleModeEntered, None));
            }
            (true, false) => {
                self.vehicle_anchor = None;
                events.push(self.apply_event(TeleopEvent::VehicleModeExited, None));
            }
            _ => {}
        }
    }

    fn vehicle_cmd(&self) -> VelocityCommand {
        let (Some(anchor), Some(l), Some(r)) = (self.vehicle_anchor, self.latest[0], self.latest[1])
        else {
            return VelocityCommand::zero();
        };
        vehicle_command(
            &displacement_vector(&anchor[0], &l.pose.translation),
            &displacement_vector(&anchor[1], &r.pose.translation),
            &self.config.vehicle,
            &self.registrations[0].rov_from_haptic.rotation,
        )
    }

    /// Runs one control period and steps the world once.
    pub fn tick(&mut self) -> TickOutput {
        let mut events = Vec::new();
        self.safety_stop(&mut events);
        self.update_vehicle_mode(&mut events);

        for i in 0..2 {
            if let (Some(clutch), Some(sample)) = (&self.clutches[i], &self.latest[i]) {
                if let Ok(pose) = clutch.desired_ee_pose(sample) {
                    self.targets[i] = Some(pose);
                }
            }
        }

        let inputs = StepInputs {
            arm_targets: self.targets,
            vehicle_cmd: self.vehicle_cmd(),
            gripper_toggles: std::mem::take(&mut self.gripper_toggles),
            mode: self.mode(),
        };
        let (record, flags) = self.world.step(&inputs);
        self.pending_flags.merge(&flags);
        self.tick += 1;

        let snapshot = self.tick.is_multiple_of(self.config.broadcast_every()).then(|| {
            let snap = self.snapshot();
            self.pending_flags = StepFlags::default();
            OutboundMessage::StateSnapshot(Box::new(snap))
        });
        TickOutput {
            record,
            flags,
            events,
            snapshot,
        }
    }

    pub fn snapshot(&mut self) -> StateSnapshot {
        self.seq += 1;
        let st = &self.world.state;
        let arms = Device::BOTH
            .iter()
            .map(|&d| {
                let i = d.index();
                let arm = &st.arms[i];
                ArmSnapshot {
                    device: d,
                    q: arm.q.into(),
                    q_cmd: arm.q_cmd.into(),
                    ee: PoseWire::from_transform(&self.world.ee_actual(i)),
                    ee_cmd: PoseWire::from_transform(&self.world.ee_cmd(i)),
                    desired: self.targets[i].as_ref().map(PoseWire::from_transform),
                    clutched: self.clutches[i].is_some(),
                    gripper: arm.gripper,
                }
            })
            .collect();
        StateSnapshot {
            seq: self.seq,
            tick: self.tick,
            time: st.time,
            mode: self.mode().to_string(),
            vehicle: VehicleSnapshot {
                position: st.vehicle.position.into(),
                yaw: st.vehicle.yaw,
                velocity: st.vehicle.velocity.into(),
                yaw_rate: st.vehicle.yaw_rate,
            },
            arms,
            objects: st
                .objects
                .iter()
                .map(|o| ObjectSnapshot {
                    id: o.id,
                    pose: PoseWire::from_transform(&o.pose),
                    half_extents: o.half_extents.into(),
                })
                .collect(),
            grasp: st.grasp.status(),
            flags: self.pending_flags,
            dropped_samples: self.stats.dropped_samples,
        }
    }

    pub fn config_info(&self) -> ConfigInfo {
        ConfigInfo {
            tick_rate: self.config.tick_rate,
            broadcast_rate: self.config.broadcast_rate,
            chains: self.world.chains.iter().map(chain_spec).collect(),
            registrations: self.config.registration.specs().to_vec(),
            teleop_scale: self.config.teleop_scale,
        }
    }
}

/// Output of a headless run.
#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub records: Vec<TelemetryRecord>,
    /// Any step raised a flag.
    pub flags: StepFlags,
    pub events: Vec<OutboundMessage>,
    pub stats: SessionStats,
}

/// Replays a log with networking disabled: each message is ingested before
/// the tick it was recorded at, for exactly `end_tick` ticks.
pub fn replay(session: &mut Session, log: &InputLog) -> RunResult {
    let mut out = RunResult::default();
    let mut cursor = 0;
    for tick in 0..log.end_tick {
        while cursor < log.entries.len() && log.entries[cursor].tick == tick {
            let msg = &log.entries[cursor].msg;
            out.events
                .extend(session.ingest(msg).into_iter().filter(|m| matches!(m, OutboundMessage::Event { .. })));
            cursor += 1;
        }
        let t = session.tick();
        out.flags.merge(&t.flags);
        out.events.extend(t.events);
        out.records.push(t.record);
    }
    out.stats = session.stats();
    out
}
