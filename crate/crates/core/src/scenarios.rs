//! Scripted two-device sessions used as headless demonstrations.
//!
//! * `task1`: pilot the vehicle (surge, strafe, yaw), then clutch both arms
//!   and bring them slowly to a pre-grasp pose, hold, and release.
//! * `task2`: open both grippers, bring them to either side of a box, close
//!   them to cage it, and fly the vehicle forward carrying the box.
//! * `task2_perturbed`: as `task2`, but after caging the left arm alone is
//!   pulled 0.1 m outward, which breaks the grasp.
//!
//! The bundled files under `scenarios/` are produced by [`bundled`] and a
//! test keeps them in sync.

use crate::kinematics::{home_configuration, Rotation, Transform, Vec3};
use crate::session::protocol::{InboundMessage, StylusWire};
use crate::session::{InputLog, LogEntry, SessionConfig};
use crate::teleop::Device;

/// A generated scenario: session config, input log and the pose targets the
/// arms should end on.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    /// TOML for the session config; references the log by file name.
    pub config_text: String,
    pub log: InputLog,
    /// Final desired end-effector poses in the vehicle frame.
    pub targets: [Option<Transform>; 2],
}

impl Scenario {
    pub fn config(&self) -> SessionConfig {
        SessionConfig::parse(&self.config_text).expect("generated configs are valid")
    }

    pub fn log_file_name(&self) -> String {
        format!("{}.jsonl", self.name)
    }

    pub fn config_file_name(&self) -> String {
        format!("{}.toml", self.name)
    }
}

/// Ticks a single button press must be held before it commits.
const COMMIT_TICKS: u64 = 20;

struct Script {
    dt: f64,
    /// Device frame to vehicle frame rotation, per device.
    rov_from_haptic: [Rotation; 2],
    scale: f64,
    tick: u64,
    position: [Vec3; 2],
    buttons: [(bool, bool); 2],
    entries: Vec<LogEntry>,
}

impl Script {
    fn new(config: &SessionConfig) -> Self {
        let regs = config.registrations();
        Self {
            dt: 1.0 / config.tick_rate,
            rov_from_haptic: regs.map(|r| r.rov_from_haptic.rotation),
            scale: config.teleop_scale,
            tick: 0,
            position: [Vec3::zeros(); 2],
            buttons: [(false, false); 2],
            entries: Vec::new(),
        }
    }

    /// One tick with a sample from each device.
    fn step(&mut self) {
        for d in Device::BOTH {
            let i = d.index();
            let (m, v) = self.buttons[i];
            self.entries.push(LogEntry {
                tick: self.tick,
                msg: InboundMessage::Stylus(StylusWire {
                    device: d,
                    position: self.position[i].into(),
                    orientation: [1.0, 0.0, 0.0, 0.0],
                    button_manip: m,
                    button_vehicle: v,
                    timestamp: self.tick as f64 * self.dt,
                }),
            });
        }
        self.tick += 1;
    }

    fn hold(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.step();
        }
    }

    fn buttons(&mut self, devices: &[Device], manip: bool, vehicle: bool) {
        for d in devices {
            self.buttons[d.index()] = (manip, vehicle);
        }
    }

    /// Press (or release) and hold long enough for the state machine to commit.
    fn press(&mut self, devices: &[Device], manip: bool, vehicle: bool) {
        self.buttons(devices, manip, vehicle);
        self.hold(COMMIT_TICKS);
    }

    /// Both buttons together, then both up: one gripper toggle per device.
    fn chord(&mut self, devices: &[Device]) {
        self.press(devices, true, true);
        self.press(devices, false, false);
    }

    /// Moves the styluses linearly by device-frame displacements.
    fn move_haptic(&mut self, moves: &[(Device, Vec3)], ticks: u64) {
        let start = self.position;
        for k in 1..=ticks {
            let f = k as f64 / ticks as f64;
            for (d, delta) in moves {
                let i = d.index();
                self.position[i] = start[i] + delta * f;
            }
            self.step();
        }
    }

    /// Moves styluses so that clutched arms travel by `delta` in the vehicle
    /// frame, at `speed` m/s of arm motion.
    fn move_arm(&mut self, moves: &[(Device, Vec3)], speed: f64) {
        let longest = moves.iter().map(|(_, d)| d.norm()).fold(0.0, f64::max);
        let ticks = ((longest / speed) / self.dt).ceil().max(1.0) as u64;
        let haptic: Vec<_> = moves
            .iter()
            .map(|(d, delta)| (*d, self.haptic_delta(*d, delta)))
            .collect();
        self.move_haptic(&haptic, ticks);
    }

    fn haptic_delta(&self, d: Device, rov: &Vec3) -> Vec3 {
        self.rov_from_haptic[d.index()].inverse() * rov / self.scale
    }

    fn finish(self) -> InputLog {
        InputLog {
            entries: self.entries,
            end_tick: self.tick,
        }
    }
}

fn home_ee(config: &SessionConfig) -> [Transform; 2] {
    let chains = config.chains().expect("bundled chains load");
    [0, 1].map(|i| chains[i].frames_unchecked(&home_configuration()).ee().to_owned())
}

const BOTH: [Device; 2] = [Device::Left, Device::Right];

/// Vehicle mode with both distal buttons, then surge, strafe and yaw.
fn pilot(s: &mut Script) {
    s.press(&BOTH, false, true);
    s.hold(5);
    let legs = [
        // Forward.
        (Vec3::new(0.04, 0.0, 0.0), Vec3::new(0.04, 0.0, 0.0), 200),
        // Left.
        (Vec3::new(0.0, 0.04, 0.0), Vec3::new(0.0, 0.04, 0.0), 150),
    ];
    for (l, r, hold) in legs {
        let (lh, rh) = (s.haptic_delta(Device::Left, &l), s.haptic_delta(Device::Right, &r));
        s.move_haptic(&[(Device::Left, lh), (Device::Right, rh)], 25);
        s.hold(hold);
        s.move_haptic(&[(Device::Left, -lh), (Device::Right, -rh)], 25);
        s.hold(50);
    }
    // Yaw: left stylus toward the operator, right away.
    let toward = Vec3::new(0.0, 0.0, 0.04);
    s.move_haptic(&[(Device::Left, toward), (Device::Right, -toward)], 25);
    s.hold(150);
    s.move_haptic(&[(Device::Left, -toward), (Device::Right, toward)], 25);
    s.hold(50);
    s.press(&BOTH, false, false);
}

pub fn task1() -> Scenario {
    let config_text = "scenario = \"task1.jsonl\"\n".to_string();
    let config = SessionConfig::parse(&config_text).expect("valid");
    let mut s = Script::new(&config);
    s.hold(50);
    pilot(&mut s);
    s.hold(50);

    // Clutch both arms and approach a pre-grasp pose slowly.
    s.press(&BOTH, true, false);
    let deltas = [Vec3::new(0.08, -0.03, -0.06), Vec3::new(0.08, 0.03, -0.06)];
    s.move_arm(&[(Device::Left, deltas[0]), (Device::Right, deltas[1])], 0.02);
    // Dwell at the pre-grasp pose; the steady-state sag shows up here.
    s.hold(1000);
    s.press(&BOTH, false, false);
    s.hold(200);

    let home = home_ee(&config);
    let targets = [0, 1].map(|i| {
        let mut t = home[i];
        t.translation += deltas[i];
        Some(t)
    });
    Scenario {
        name: "task1",
        config_text,
        log: s.finish(),
        targets,
    }
}

/// Box half extents; the long side faces the grippers.
const BOX_HALF: [f64; 3] = [0.05, 0.06, 0.04];
/// Gap between each closed gripper and its box face.
const FACE_GAP: f64 = 0.02;

fn task2_common(name: &'static str, perturb: bool) -> Scenario {
    let base = SessionConfig::default();
    let home = home_ee(&base);
    // Bring both grippers level and inward to straddle the box along y.
    let reach = Vec3::new(0.0, 0.0, 0.03);
    let mid_home = (home[0].translation + home[1].translation) * 0.5 + reach;
    let inward = [0, 1].map(|i| {
        let to_mid_y = mid_home.y - home[i].translation.y;
        let stop = to_mid_y.signum() * (BOX_HALF[1] + FACE_GAP);
        Vec3::new(mid_home.x - home[i].translation.x, to_mid_y - stop, mid_home.z - home[i].translation.z)
    });
    let box_center = mid_home;
    let config_text = format!(
        "scenario = \"{name}.jsonl\"\n\n[[objects]]\nid = 1\npose = {{ translation = [{:?}, {:?}, {:?}] }}\nhalf_extents = [{:?}, {:?}, {:?}]\n",
        box_center.x, box_center.y, box_center.z, BOX_HALF[0], BOX_HALF[1], BOX_HALF[2]
    );
    let config = SessionConfig::parse(&config_text).expect("valid");

    let mut s = Script::new(&config);
    s.hold(20);
    s.chord(&BOTH);
    s.hold(40);
    s.press(&BOTH, true, false);
    s.move_arm(&[(Device::Left, inward[0]), (Device::Right, inward[1])], 0.03);
    s.hold(150);
    s.press(&BOTH, false, false);
    s.chord(&BOTH);
    s.hold(60);

    let mut targets = [0, 1].map(|i| {
        let mut t = home[i];
        t.translation += inward[i];
        Some(t)
    });
    if perturb {
        let away = Vec3::new(0.0, 0.1, 0.0);
        s.press(&[Device::Left], true, false);
        s.move_arm(&[(Device::Left, away)], 0.05);
        s.hold(100);
        s.press(&[Device::Left], false, false);
        if let Some(t) = targets[0].as_mut() {
            t.translation += away;
        }
    } else {
        // Carry the box forward with the vehicle.
        s.press(&BOTH, false, true);
        let fwd = Vec3::new(0.04, 0.0, 0.0);
        let (lh, rh) = (s.haptic_delta(Device::Left, &fwd), s.haptic_delta(Device::Right, &fwd));
        s.move_haptic(&[(Device::Left, lh), (Device::Right, rh)], 25);
        s.hold(200);
        s.move_haptic(&[(Device::Left, -lh), (Device::Right, -rh)], 25);
        s.press(&BOTH, false, false);
        s.hold(150);
    }
    s.hold(50);
    Scenario {
        name,
        config_text,
        log: s.finish(),
        targets,
    }
}

pub fn task2() -> Scenario {
    task2_common("task2", false)
}

pub fn task2_perturbed() -> Scenario {
    task2_common("task2_perturbed", true)
}

pub fn bundled() -> Vec<Scenario> {
    vec![task1(), task2(), task2_perturbed()]
}

/// Bundled scenario files, `(file name, contents)`.
pub const BUNDLED_FILES: [(&str, &str); 6] = [
    ("task1.toml", include_str!("../scenarios/task1.toml")),
    ("task1.jsonl", include_str!("../scenarios/task1.jsonl")),
    ("task2.toml", include_str!("../scenarios/task2.toml")),
    ("task2.jsonl", include_str!("../scenarios/task2.jsonl")),
    ("task2_perturbed.toml", include_str!("../scenarios/task2_perturbed.toml")),
    ("task2_perturbed.jsonl", include_str!("../scenarios/task2_perturbed.jsonl")),
];
