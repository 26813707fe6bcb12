//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! Every expected value here comes from an oracle that does not share code
//! with the implementation under test: finite differences, quaternion
//! logarithms, literal 4×4 products, a hand-written decision table, and
//! direct inspection of simulator state.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use futures_util::SinkExt;
use nalgebra::{Matrix4, Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio_tungstenite::tungstenite::Message;
use uvms_cli::server::{self, ServeOptions};
use uvms_core::analysis::ErrorReport;
use uvms_core::kinematics::{
    default_left_arm, default_right_arm, home_configuration, Joint,
    JointVector, KinematicChain, Rotation, Transform, Vec3,
};
use uvms_core::resolved_rate::{orientation_error, scheduled_speed, track, RateLimits};
use uvms_core::scenarios;
use uvms_core::session::{InputLog, Session};
use uvms_core::sim::telemetry::read_telemetry;
use uvms_core::sim::GraspStatus;
use uvms_core::teleop::{ArmClutch, Device, Registration, StylusSample};
use uvms_core::vehicle_teleop::{vehicle_command, VehicleTeleopConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("jacobian vs finite differences", jacobian),
        ("orientation error vs rotation log", orientation),
        ("rate control convergence", convergence),
        ("speed schedule shape", schedule),
        ("clutch mapping exactness", clutch),
        ("vehicle rule table", vehicle_rules),
        ("task 1 pre-grasp reproduction", task1),
        ("task 2 caging reproduction", task2),
        ("determinism and replay", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.2} s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.2} s) {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let q = nalgebra::Quaternion::new(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_transform(rng: &mut ChaCha8Rng, r: f64) -> Transform {
    Transform::new(random_rotation(rng), random_vec(rng, r))
}

/// Rotation logarithm through unit quaternions, `w ≥ 0` branch.
fn quat_log(q: &UnitQuaternion<f64>) -> Vec3 {
    let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
    let s = v.norm();
    if s == 0.0 {
        return Vec3::zeros();
    }
    v / s * (2.0 * s.atan2(w))
}

fn rotation_log(r: &Rotation) -> Vec3 {
    quat_log(&UnitQuaternion::from_rotation_matrix(r))
}

fn jacobian() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let joints = (0..6)
            .map(|_| Joint {
                zero_config: random_transform(&mut rng, 0.4),
                axis: random_unit(&mut rng),
                limits: None,
            })
            .collect();
        let chain = KinematicChain::new("random", random_transform(&mut rng, 0.5), joints).unwrap();
        let q = JointVector::from_fn(|_, _| rng.random_range(-PI..PI));
        let jac = chain.jacobian(&q).unwrap();
        for i in 0..6 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += h;
            qm[i] -= h;
            let tp = chain.end_effector(&qp).unwrap();
            let tm = chain.end_effector(&qm).unwrap();
            let lin = (tp.translation - tm.translation) / (2.0 * h);
            let ang = rotation_log(&(tp.rotation * tm.rotation.inverse())) / (2.0 * h);
            for k in 0..3 {
                worst = worst
                    .max((jac[(k, i)] - lin[k]).abs())
                    .max((jac[(k + 3, i)] - ang[k]).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-5, || format!("max column deviation {worst:e}"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("max deviation {worst:.1e} over 100 chains"))
}

fn orientation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut check = |current: UnitQuaternion<f64>, delta: UnitQuaternion<f64>| {
        let desired = delta * current;
        let rd = desired.to_rotation_matrix();
        let rc = current.to_rotation_matrix();
        let got = orientation_error(&rd, &rc);
        let rel = UnitQuaternion::from_rotation_matrix(&rd) * UnitQuaternion::from_rotation_matrix(&rc).inverse();
        let want = quat_log(&rel);
        // At exactly π both ±axis are valid logarithms.
        let err = if want.norm() > PI - 1e-9 {
            (got - want).norm().min((got + want).norm())
        } else {
            (got - want).norm()
        };
        worst = worst.max(err);
        cases += 1;
    };
    let random_q = |rng: &mut ChaCha8Rng| UnitQuaternion::from_rotation_matrix(&random_rotation(rng));
    for i in 0..1000 {
        let current = random_q(&mut rng);
        let axis = Unit::new_normalize(random_unit(&mut rng));
        let theta = match i % 5 {
            0 | 1 => rng.random_range(0.0..PI),
            2 => 10f64.powf(rng.random_range(-12.0..-6.0)),
            3 => PI - 10f64.powf(rng.random_range(-8.0..-3.0)),
            _ => [0.0, PI, 1e-6, PI - 1e-3, PI / 2.0][i / 5 % 5],
        };
        check(current, UnitQuaternion::from_axis_angle(&axis, theta));
    }
    // Half turns about the frame axes.
    for a in [Vec3::x_axis(), Vec3::y_axis(), Vec3::z_axis()] {
        check(UnitQuaternion::identity(), UnitQuaternion::from_axis_angle(&a, PI));
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e} over {cases} pairs"))
}

fn convergence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let limits = RateLimits::default();
    let chains = [default_left_arm(), default_right_arm()];
    let mut worst_steps = 0;
    let mut failures = Vec::new();
    let within = |c: &KinematicChain, q: &JointVector| c.check_limits(q).is_ok();
    for n in 0..100 {
        let chain = &chains[n % 2];
        let (q0, qt) = loop {
            let q0 = home_configuration() + JointVector::from_fn(|_, _| rng.random_range(-0.4..0.4));
            let qt = q0 + JointVector::from_fn(|_, _| rng.random_range(-0.5..0.5));
            let sigma = chain.jacobian(&q0).map(|j| j.singular_values().min()).unwrap_or(0.0);
            if within(chain, &q0) && within(chain, &qt) && sigma >= 0.02 {
                break (q0, qt);
            }
        };
        let target = chain.end_effector(&qt).unwrap();
        let r = track(chain, &q0, &target, &limits, 2000).unwrap();
        if r.converged {
            worst_steps = worst_steps.max(r.iterations);
        } else {
            failures.push(format!(
                "#{n}: |e_p| {:.2e} |e_o| {:.2e}",
                r.final_error.position.norm(),
                r.final_error.orientation.norm()
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(failures.is_empty(), || format!("{} did not converge: {}", failures.len(), failures.join("; ")))?;
    ensure(secs < 30.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100/100 converged, slowest {worst_steps} steps"))
}

fn schedule() -> Check {
    let l = RateLimits::default();
    for (max, min, tol, ratio) in [
        (l.v_max, l.v_min, l.pos_tolerance, l.pos_ramp_ratio),
        (l.w_max, l.w_min, l.rot_tolerance, l.rot_ramp_ratio),
    ] {
        let f = |e| scheduled_speed(e, max, min, tol, ratio);
        let n = 10_000;
        // Continuity over the moving region; the dead band below the
        // tolerance is checked separately because the speed steps from 0
        // to the minimum there by design.
        let (lo, hi) = (tol, 2.0 * ratio * tol);
        let mut prev = f(lo + (hi - lo) / n as f64);
        let mut jump: f64 = 0.0;
        for k in 2..=n {
            let v = f(lo + (hi - lo) * k as f64 / n as f64);
            jump = jump.max((v - prev).abs());
            prev = v;
        }
        ensure(jump <= (max - min) * 1e-3, || format!("jump {jump:e} at tolerance {tol}"))?;
        for k in 0..=n {
            let e = ratio * tol * (1.0 + 9.0 * k as f64 / n as f64);
            ensure(f(e) == max, || format!("speed {} at {e} (≥ λδ)", f(e)))?;
            let e = tol * k as f64 / n as f64;
            ensure(f(e) == 0.0, || format!("speed {} at {e} (≤ δ)", f(e)))?;
        }
    }
    Ok("linear and angular schedules".into())
}

fn homogeneous(t: &Transform) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(t.rotation.matrix());
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t.translation);
    m
}

fn max_abs(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).abs().max()
}

fn clutch() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    let mut worst_bump: f64 = 0.0;
    let sample = |pose| StylusSample {
        device: Device::Left,
        pose,
        button_manip: true,
        button_vehicle: false,
        timestamp: 0.0,
    };
    for _ in 0..1000 {
        let reg = Registration {
            rov_from_haptic: random_transform(&mut rng, 0.5),
        };
        let s_a = random_transform(&mut rng, 0.2);
        let e_a = random_transform(&mut rng, 1.0);
        let s_now = random_transform(&mut rng, 0.2);
        let c = ArmClutch::begin(&sample(s_a), &e_a, &reg);
        let got = c.desired_ee_pose(&sample(s_now)).unwrap();

        let inv = |m: Matrix4<f64>| m.try_inverse().unwrap();
        let bridge = inv(homogeneous(&e_a)) * homogeneous(&reg.rov_from_haptic) * homogeneous(&s_a);
        let rel = inv(homogeneous(&s_a)) * homogeneous(&s_now);
        let want = homogeneous(&e_a) * bridge * rel * inv(bridge);
        worst = worst.max(max_abs(&homogeneous(&got), &want));

        // Engaging reproduces the current pose; re-engaging after the stylus
        // moved while released continues from where the arm was left.
        let at_anchor = c.desired_ee_pose(&sample(s_a)).unwrap();
        worst_bump = worst_bump.max(max_abs(&homogeneous(&at_anchor), &homogeneous(&e_a)));
        let mut c = c;
        c.release();
        let s_re = random_transform(&mut rng, 0.2);
        let again = ArmClutch::begin(&sample(s_re), &got, &reg);
        let resumed = again.desired_ee_pose(&sample(s_re)).unwrap();
        worst_bump = worst_bump.max(max_abs(&homogeneous(&resumed), &homogeneous(&got)));
    }
    ensure(worst <= 1e-12, || format!("recomposition deviation {worst:e}"))?;
    ensure(worst_bump <= 1e-12, || format!("re-clutch jump {worst_bump:e}"))?;
    Ok(format!("max deviation {worst:.1e}, max re-clutch jump {worst_bump:.1e}"))
}

/// Expected vehicle command by the decision table: both outside the
/// dead-zone, same dominant axis; same sign translates, opposite signs on the
/// depth axis yaw, anything else stops.
fn rule_table(l: &Vec3, r: &Vec3, cfg: &VehicleTeleopConfig, reg: &Rotation) -> (Vec3, f64) {
    let dominant = |v: &Vec3| -> Option<(usize, f64)> {
        if v.norm() <= cfg.dead_zone {
            return None;
        }
        let (i, m) = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
        Some((i, m.signum()))
    };
    match (dominant(l), dominant(r)) {
        (Some((a, sa)), Some((b, sb))) if a == b && sa == sb => {
            (reg.matrix().column(a) * sa * cfg.linear_speed, 0.0)
        }
        (Some((2, sa)), Some((2, _))) => (Vec3::zeros(), sa * cfg.yaw_rate),
        _ => (Vec3::zeros(), 0.0),
    }
}

fn vehicle_rules() -> Check {
    let cfg = VehicleTeleopConfig::default();
    let dz = cfg.dead_zone;
    let mut inputs = vec![Vec3::zeros()];
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            for m in [0.3 * dz, 0.9 * dz, 1.1 * dz, 4.0 * dz] {
                for (o1, o2) in [(0.0, 0.0), (0.3, -0.2), (-0.6, 0.5)] {
                    let mut v = Vec3::zeros();
                    v[axis] = sign * m;
                    v[(axis + 1) % 3] = o1 * m;
                    v[(axis + 2) % 3] = o2 * m;
                    inputs.push(v);
                }
            }
        }
    }
    let regs = [Rotation::identity(), Registration::desk_axes()];
    let mut cases = 0;
    let (mut translate, mut yaw) = (0, 0);
    for reg in &regs {
        for l in &inputs {
            for r in &inputs {
                let got = vehicle_command(l, r, &cfg, reg);
                let (lin, w) = rule_table(l, r, &cfg, reg);
                ensure((got.linear - lin).norm() <= 1e-15 && got.yaw_rate == w, || {
                    format!("left {l:?} right {r:?}: got {got:?}, table ({lin:?}, {w})")
                })?;
                translate += (lin != Vec3::zeros()) as usize;
                yaw += (w != 0.0) as usize;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases ({translate} translate, {yaw} yaw)"))
}

fn uvms(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_uvms"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "uvms {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn task1() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let telemetry = dir.path().join("telemetry.csv");
    let report_dir = dir.path().join("report");
    uvms(&["scenario", "--config", p(&scenario_dir().join("task1.toml")), "--telemetry", p(&telemetry)])?;
    uvms(&["analyze", "--telemetry", p(&telemetry), "--out-dir", p(&report_dir)])?;
    let secs = start.elapsed().as_secs_f64();

    let records = read_telemetry(fs::File::open(&telemetry).unwrap()).map_err(|e| e.to_string())?;
    let report: ErrorReport =
        serde_json::from_str(&fs::read_to_string(report_dir.join("report.json")).unwrap()).map_err(|e| e.to_string())?;
    let scenario = scenarios::task1();
    let bound = 2.0 * scenario.config().rate_limits.pos_tolerance;
    let last = records.last().ok_or("no telemetry rows")?;
    let mut finals = Vec::new();
    for (i, arm) in report.arms.iter().enumerate() {
        let target = scenario.targets[i].ok_or("scenario has no target")?;
        let ee = Vec3::from(last.arms[i].ee_cmd.position);
        let err = (ee - target.translation).norm();
        ensure(err <= bound, || format!("{} final ee error {err:.2e} > {bound:.2e}", arm.device))?;
        let [x, y, z] = arm.position.map(|c| c.rms);
        ensure(z > x && z > y, || format!("{} axis rms x {x:.2e} y {y:.2e} z {z:.2e}", arm.device))?;
        ensure(arm.worst_joint == 2, || format!("{} largest joint rms is joint {}", arm.device, arm.worst_joint))?;
        finals.push(format!("{} final {err:.1e} m, z rms {z:.1e} m", arm.device));
    }
    ensure(secs < 60.0, || format!("took {secs:.2} s"))?;
    Ok(finals.join(", "))
}

struct GraspRun {
    caged_ticks: usize,
    max_drift: f64,
    moved: f64,
    final_status: GraspStatus,
}

/// Runs a scenario tick by tick and watches the box and the gripper midpoint.
fn grasp_run(s: &scenarios::Scenario) -> GraspRun {
    let mut session = Session::new(s.config()).unwrap();
    let start = session.world().state.objects[0].pose;
    let mut offset: Option<Matrix4<f64>> = None;
    let mut out = GraspRun {
        caged_ticks: 0,
        max_drift: 0.0,
        moved: 0.0,
        final_status: GraspStatus::Free,
    };
    for tick in 0..s.log.end_tick {
        for msg in s.log.at_tick(tick) {
            session.ingest(msg);
        }
        session.tick();
        let w = session.world();
        out.final_status = w.state.grasp.status();
        if out.final_status != GraspStatus::Caged {
            offset = None;
            continue;
        }
        out.caged_ticks += 1;
        let mid = homogeneous(&w.midpoint(&w.gripper_pair()));
        let rel = mid.try_inverse().unwrap() * homogeneous(&w.state.objects[0].pose);
        match &offset {
            None => offset = Some(rel),
            Some(o) => out.max_drift = out.max_drift.max(max_abs(o, &rel)),
        }
    }
    out.moved = (session.world().state.objects[0].pose.translation - start.translation).norm();
    out
}

fn task2() -> Check {
    let carry = grasp_run(&scenarios::task2());
    ensure(carry.caged_ticks > 0, || "never caged".into())?;
    ensure(carry.final_status == GraspStatus::Caged, || "grasp lost during transport".into())?;
    ensure(carry.max_drift <= 1e-12, || format!("midpoint-to-object drift {:e}", carry.max_drift))?;
    ensure(carry.moved >= 0.2, || format!("box moved {:.3} m", carry.moved))?;
    let pulled = grasp_run(&scenarios::task2_perturbed());
    ensure(pulled.caged_ticks > 0, || "perturbed run never caged".into())?;
    ensure(pulled.final_status == GraspStatus::Free, || "perturbed run still caged".into())?;
    Ok(format!(
        "caged {} ticks, box moved {:.3} m, drift {:.1e}; perturbed run released",
        carry.caged_ticks, carry.moved, carry.max_drift
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for s in scenarios::bundled() {
        let cfg = scenario_dir().join(s.config_file_name());
        let a = dir.path().join(format!("{}_a.csv", s.name));
        let b = dir.path().join(format!("{}_b.csv", s.name));
        uvms(&["scenario", "--config", p(&cfg), "--telemetry", p(&a)])?;
        uvms(&["scenario", "--config", p(&cfg), "--telemetry", p(&b)])?;
        ensure(fs::read(&a).unwrap() == fs::read(&b).unwrap(), || format!("{} runs differ", s.name))?;
    }

    // Live run through the socket server, recorded, then replayed offline.
    let log = dir.path().join("live.jsonl");
    let live = dir.path().join("live.csv");
    let replayed = dir.path().join("replayed.csv");
    let scenario = scenarios::task2();
    let ticks = 400;
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let srv = server::start(
            scenario.config(),
            ServeOptions {
                port: Some(0),
                log: Some(log.clone()),
                telemetry: Some(live.clone()),
                max_ticks: Some(ticks),
            },
        )
        .await
        .unwrap();
        let url = format!("ws://127.0.0.1:{}/ws", srv.addr.port());
        let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
        let t0 = tokio::time::Instant::now();
        for e in scenario.log.entries.iter().filter(|e| e.tick + 20 < ticks) {
            tokio::time::sleep_until(t0 + Duration::from_millis(10 * e.tick)).await;
            ws.send(Message::text(e.msg.to_json())).await.unwrap();
        }
        srv.join().await.unwrap();
    });
    let recorded = InputLog::parse(&fs::read_to_string(&log).unwrap()).map_err(|e| e.to_string())?;
    uvms(&[
        "replay",
        "--config",
        p(&scenario_dir().join("task2.toml")),
        "--log",
        p(&log),
        "--telemetry",
        p(&replayed),
    ])?;
    let (a, b) = (fs::read(&live).unwrap(), fs::read(&replayed).unwrap());
    ensure(a == b, || format!("live telemetry ({} bytes) differs from replay ({} bytes)", a.len(), b.len()))?;
    Ok(format!(
        "3 scenarios byte-identical; live session of {} messages replayed byte-identical",
        recorded.entries.len()
    ))
}
