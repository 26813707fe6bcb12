//! Resolved motion rate control: pose error → scheduled end-effector twist →
//! joint rates through the Jacobian inverse → integrated joint commands.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    Jacobian, JointVector, KinematicChain, KinematicsError, Rotation, Transform, Twist, Vec3,
};

/// Below this smallest singular value the Jacobian is treated as singular and
/// damped least squares takes over.
pub const SINGULAR_VALUE_TOL: f64 = 1e-4;
/// Damping factor for the damped least-squares solve.
pub const DLS_DAMPING: f64 = 0.01;

/// Orientation errors smaller than this are handled with the small-angle limit.
const SMALL_ANGLE: f64 = 1e-7;
/// Orientation errors within this distance of π extract the axis from the
/// symmetric part of the error rotation.
const NEAR_PI: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateLimitsError {
    #[error("rate limits violate {0}")]
    Invalid(&'static str),
}

/// Tuning of the speed schedule and the integration step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateLimits {
    /// Maximum and minimum end-effector linear speed, m/s.
    pub v_max: f64,
    pub v_min: f64,
    /// Maximum and minimum end-effector angular speed, rad/s.
    pub w_max: f64,
    pub w_min: f64,
    /// Allowable position error, m.
    pub pos_tolerance: f64,
    /// Allowable orientation error, rad.
    pub rot_tolerance: f64,
    /// Error radius (in multiples of the tolerance) where the speed switches
    /// from the constant rate to the proportional ramp.
    pub pos_ramp_ratio: f64,
    pub rot_ramp_ratio: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for RateLimits {
    fn default() -> Self {
        Self {
            v_max: 0.10,
            v_min: 0.01,
            w_max: 0.5,
            w_min: 0.05,
            pos_tolerance: 0.002,
            rot_tolerance: 0.01,
            pos_ramp_ratio: 10.0,
            rot_ramp_ratio: 10.0,
            dt: 0.01,
        }
    }
}

impl RateLimits {
    pub fn validate(&self) -> Result<(), RateLimitsError> {
        let all_finite = [
            self.v_max,
            self.v_min,
            self.w_max,
            self.w_min,
            self.pos_tolerance,
            self.rot_tolerance,
            self.pos_ramp_ratio,
            self.rot_ramp_ratio,
            self.dt,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(RateLimitsError::Invalid("finiteness"));
        }
        if !(self.v_max >= self.v_min && self.v_min > 0.0) {
            return Err(RateLimitsError::Invalid("v_max >= v_min > 0"));
        }
        if !(self.w_max >= self.w_min && self.w_min > 0.0) {
            return Err(RateLimitsError::Invalid("w_max >= w_min > 0"));
        }
        if !(self.pos_tolerance > 0.0 && self.rot_tolerance > 0.0) {
            return Err(RateLimitsError::Invalid("tolerances > 0"));
        }
        if !(self.pos_ramp_ratio > 1.0 && self.rot_ramp_ratio > 1.0) {
            return Err(RateLimitsError::Invalid("ramp ratios > 1"));
        }
        if !(self.dt > 0.0) {
            return Err(RateLimitsError::Invalid("dt > 0"));
        }
        Ok(())
    }
}

/// Target end-effector pose in `{ROV}`.
pub type DesiredPose = Transform;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PoseError {
    /// Position error, m.
    pub position: Vec3,
    /// Orientation error as axis × angle, rad.
    pub orientation: Vec3,
}

impl PoseError {
    pub fn between(desired: &Transform, current: &Transform) -> Self {
        Self {
            position: position_error(&desired.translation, &current.translation),
            orientation: orientation_error(&desired.rotation, &current.rotation),
        }
    }

    pub fn within(&self, limits: &RateLimits) -> bool {
        self.position.norm() <= limits.pos_tolerance
            && self.orientation.norm() <= limits.rot_tolerance
    }
}

pub fn position_error(desired: &Vec3, current: &Vec3) -> Vec3 {
    desired - current
}

/// Axis-angle vector of `R_d·Rᵀ`, with norm equal to its rotation angle in `[0, π]`.
pub fn orientation_error(desired: &Rotation, current: &Rotation) -> Vec3 {
    let re = (desired * current.inverse()).into_inner();
    let vee = Vec3::new(
        re[(2, 1)] - re[(1, 2)],
        re[(0, 2)] - re[(2, 0)],
        re[(1, 0)] - re[(0, 1)],
    );
    let cos_theta = ((re.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin_theta = vee.norm() / 2.0;
    // atan2 is arccos of the same clamped argument, without its loss of
    // precision near 0 and π.
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        // θ / (2 sin θ) → 1/2
        return vee * 0.5;
    }
    if theta < std::f64::consts::PI - NEAR_PI {
        return vee * (theta / (2.0 * theta.sin()));
    }

    // Near π the antisymmetric part vanishes; recover the axis from
    // (R_e + I)/2 = cos²(θ/2)·I + sin²(θ/2)·n·nᵀ + (sin θ / 2)·[n]×.
    let half_one_minus_cos = (1.0 - cos_theta) / 2.0;
    let half_one_plus_cos = (1.0 + cos_theta) / 2.0;
    let b = (re + nalgebra::Matrix3::identity()) * 0.5;
    let k = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .expect("three diagonal entries");
    let mut axis = Vec3::zeros();
    axis[k] = ((b[(k, k)] - half_one_plus_cos) / half_one_minus_cos).max(0.0).sqrt();
    for i in (0..3).filter(|&i| i != k) {
        let sym = (b[(i, k)] + b[(k, i)]) / 2.0;
        axis[i] = sym / (half_one_minus_cos * axis[k]);
    }
    let axis = axis.normalize();
    let signed = if axis.dot(&vee) < 0.0 { -axis } else { axis };
    signed * theta
}

/// Speed magnitude for an error of norm `err`: zero within the tolerance,
/// a linear ramp from `min` up to `max` between the tolerance and
/// `ratio × tolerance`, and `max` beyond.
pub fn scheduled_speed(err: f64, max: f64, min: f64, tolerance: f64, ratio: f64) -> f64 {
    if err <= tolerance {
        0.0
    } else if err >= ratio * tolerance {
        max
    } else {
        min + (max - min) * (err - tolerance) / (tolerance * (ratio - 1.0))
    }
}

pub fn desired_twist(err: &PoseError, limits: &RateLimits) -> Twist {
    let ep = err.position.norm();
    let eo = err.orientation.norm();
    let v = scheduled_speed(ep, limits.v_max, limits.v_min, limits.pos_tolerance, limits.pos_ramp_ratio);
    let w = scheduled_speed(eo, limits.w_max, limits.w_min, limits.rot_tolerance, limits.rot_ramp_ratio);
    Twist {
        linear: if v > 0.0 { err.position * (v / ep) } else { Vec3::zeros() },
        angular: if w > 0.0 { err.orientation * (w / eo) } else { Vec3::zeros() },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointRates {
    pub rates: JointVector,
    /// Damped least squares was used because the Jacobian is near-singular.
    pub damped: bool,
}

/// `q̇ = J⁻¹ξ` when the Jacobian is well conditioned, otherwise
/// `Jᵀ(JJᵀ + λ²I)⁻¹ξ`.
pub fn joint_velocities(jac: &Jacobian, twist: &Twist) -> JointRates {
    let xi = twist.to_vector();
    let sigma_min = jac.singular_values().min();
    if sigma_min >= SINGULAR_VALUE_TOL {
        if let Some(rates) = jac.lu().solve(&xi) {
            if rates.iter().all(|v| v.is_finite()) {
                return JointRates {
                    rates,
                    damped: false,
                };
            }
        }
    }
    JointRates {
        rates: damped_least_squares(jac, &xi, DLS_DAMPING),
        damped: true,
    }
}

fn damped_least_squares(jac: &Jacobian, xi: &Vector6<f64>, damping: f64) -> JointVector {
    let jjt = jac * jac.transpose() + Matrix6::identity() * (damping * damping);
    let y = jjt
        .cholesky()
        .map(|c| c.solve(xi))
        .unwrap_or_else(Vector6::zeros);
    jac.transpose() * y
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmrcStep {
    pub q_next: JointVector,
    pub twist: Twist,
    /// Error at the configuration the step started from.
    pub error: PoseError,
    pub converged: bool,
    pub damped: bool,
    /// The integrated command hit a joint limit and was clamped.
    pub limited: bool,
}

/// One control step from `q` toward `target`.
///
/// A joint-limit violation never aborts: the command is clamped and flagged.
pub fn rmrc_step(
    chain: &KinematicChain,
    q: &JointVector,
    target: &DesiredPose,
    limits: &RateLimits,
) -> RmrcStep {
    let mut q_start = *q;
    let start_limited = chain.clamp_to_limits(&mut q_start);
    let fk = chain.frames_unchecked(&q_start);
    let error = PoseError::between(target, fk.ee());
    if error.within(limits) {
        return RmrcStep {
            q_next: q_start,
            twist: Twist::zero(),
            error,
            converged: true,
            damped: false,
            limited: start_limited,
        };
    }
    let twist = desired_twist(&error, limits);
    let jac = chain.jacobian_from_frames(&fk);
    let rates = joint_velocities(&jac, &twist);
    let mut q_next = q_start + rates.rates * limits.dt;
    let limited = chain.clamp_to_limits(&mut q_next) || start_limited;
    RmrcStep {
        q_next,
        twist,
        error,
        converged: false,
        damped: rates.damped,
        limited,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackResult {
    /// Joint commands, starting with the initial configuration.
    pub trajectory: Vec<JointVector>,
    pub converged: bool,
    /// Steps taken; zero when the start already satisfies the tolerances.
    pub iterations: usize,
    pub final_error: PoseError,
}

/// Steps the controller until the pose is within tolerance or `max_iters`
/// steps have been taken.
pub fn track(
    chain: &KinematicChain,
    q0: &JointVector,
    target: &DesiredPose,
    limits: &RateLimits,
    max_iters: usize,
) -> Result<TrackResult, KinematicsError> {
    chain.check_limits(q0)?;
    let mut trajectory = vec![*q0];
    let mut q = *q0;
    for iterations in 0..=max_iters {
        let step = rmrc_step(chain, &q, target, limits);
        if step.converged || iterations == max_iters {
            return Ok(TrackResult {
                trajectory,
                converged: step.converged,
                iterations,
                final_error: step.error,
            });
        }
        q = step.q_next;
        trajectory.push(q);
    }
    unreachable!("loop returns on the last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{
        axis_angle_rotation, default_left_arm, home_configuration, rotation_from_rpy,
    };
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Rotation logarithm through the unit quaternion, independent of the
    /// trace/antisymmetric-part route used by `orientation_error`.
    fn log_oracle(r: &Rotation) -> Vec3 {
        UnitQuaternion::from_rotation_matrix(r).scaled_axis()
    }

    fn random_rotation(rng: &mut impl Rng) -> Rotation {
        rotation_from_rpy(
            rng.random_range(-PI..PI),
            rng.random_range(-FRAC_PI_2..FRAC_PI_2),
            rng.random_range(-PI..PI),
        )
    }

    #[test]
    fn position_error_examples() {
        assert_eq!(position_error(&Vec3::x(), &Vec3::x()), Vec3::zeros());
        assert_eq!(position_error(&Vec3::x(), &Vec3::zeros()), Vec3::x());
        let a = Vec3::new(0.3, -1.2, 4.0);
        let b = Vec3::new(-0.1, 0.2, 0.5);
        assert_eq!(position_error(&a, &b), Vec3::new(a.x - b.x, a.y - b.y, a.z - b.z));
    }

    #[test]
    fn orientation_error_identity() {
        let r = rotation_from_rpy(0.3, 0.2, -1.0);
        assert_relative_eq!(orientation_error(&r, &r), Vec3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn orientation_error_quarter_turn() {
        let rd = axis_angle_rotation(&Vec3::z(), FRAC_PI_2).unwrap();
        let e = orientation_error(&rd, &Rotation::identity());
        assert_relative_eq!(e, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-12);
    }

    #[test]
    fn orientation_error_matches_log_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let rd = random_rotation(&mut rng);
            let r = random_rotation(&mut rng);
            let expected = log_oracle(&(rd * r.inverse()));
            assert_relative_eq!(orientation_error(&rd, &r), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn orientation_error_near_pi() {
        let axis = Vec3::new(0.2, -0.7, 0.4).normalize();
        for gap in [1e-3, 1e-4, 1e-6] {
            let rd = axis_angle_rotation(&axis, PI - gap).unwrap();
            let e = orientation_error(&rd, &Rotation::identity());
            assert_relative_eq!(e, axis * (PI - gap), epsilon = 1e-9);
        }
        let half = axis_angle_rotation(&axis, PI).unwrap();
        let e = orientation_error(&half, &Rotation::identity());
        assert_relative_eq!(e.norm(), PI, epsilon = 1e-12);
        assert_relative_eq!(e.normalize().dot(&axis).abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orientation_error_small_angle() {
        let axis = Vec3::new(1.0, 1.0, -1.0).normalize();
        for angle in [1e-6, 5e-8, 1e-10] {
            let rd = axis_angle_rotation(&axis, angle).unwrap();
            let e = orientation_error(&rd, &Rotation::identity());
            assert_relative_eq!(e, axis * angle, epsilon = 1e-12);
        }
    }

    #[test]
    fn schedule_examples() {
        // err beyond ratio × tolerance = 0.1
        assert_eq!(scheduled_speed(0.2, 0.10, 0.01, 0.01, 10.0), 0.10);
        assert_relative_eq!(scheduled_speed(0.1, 0.10, 0.01, 0.01, 10.0), 0.10, epsilon = 1e-15);
        assert_eq!(scheduled_speed(0.005, 0.10, 0.01, 0.01, 10.0), 0.0);
        // midpoint of the ramp
        assert_relative_eq!(
            scheduled_speed(0.055, 0.10, 0.01, 0.01, 10.0),
            0.055,
            epsilon = 1e-15
        );
    }

    #[test]
    fn twist_examples() {
        let limits = RateLimits {
            v_max: 0.10,
            v_min: 0.01,
            pos_tolerance: 0.01,
            pos_ramp_ratio: 10.0,
            ..RateLimits::default()
        };
        let zero = desired_twist(&PoseError::default(), &limits);
        assert_eq!(zero, Twist::zero());
        let t = desired_twist(
            &PoseError {
                position: Vec3::new(0.2, 0.0, 0.0),
                orientation: Vec3::zeros(),
            },
            &limits,
        );
        assert_relative_eq!(t.linear, Vec3::new(0.10, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(t.angular, Vec3::zeros());
    }

    proptest! {
        #[test]
        fn twist_norm_follows_schedule(
            p in prop::array::uniform3(-0.3f64..0.3),
            o in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let limits = RateLimits::default();
            let err = PoseError { position: Vec3::from(p), orientation: Vec3::from(o) };
            let t = desired_twist(&err, &limits);
            let v = scheduled_speed(err.position.norm(), limits.v_max, limits.v_min, limits.pos_tolerance, limits.pos_ramp_ratio);
            let w = scheduled_speed(err.orientation.norm(), limits.w_max, limits.w_min, limits.rot_tolerance, limits.rot_ramp_ratio);
            prop_assert!((t.linear.norm() - v).abs() < 1e-12);
            prop_assert!((t.angular.norm() - w).abs() < 1e-12);
        }

        #[test]
        fn schedule_is_monotone(a in 0.0f64..0.05, b in 0.0f64..0.05) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s = |e| scheduled_speed(e, 0.1, 0.01, 0.002, 10.0);
            prop_assert!(s(lo) <= s(hi));
        }

        #[test]
        fn error_axis_recovers_desired(
            a in prop::array::uniform3(-3.0f64..3.0),
            b in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let rd = rotation_from_rpy(a[0], a[1], a[2]);
            let r = rotation_from_rpy(b[0], b[1], b[2]);
            let e = orientation_error(&rd, &r);
            prop_assert!(e.norm() <= PI + 1e-9);
            if e.norm() > 1e-9 && e.norm() < PI - 1e-3 {
                let step = axis_angle_rotation(&e.normalize(), e.norm()).unwrap();
                let recovered = step * r;
                prop_assert!((recovered.matrix() - rd.matrix()).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_twist_gives_zero_rates() {
        let jac = default_left_arm().jacobian(&home_configuration()).unwrap();
        let r = joint_velocities(&jac, &Twist::zero());
        assert_eq!(r.rates, JointVector::zeros());
        assert!(!r.damped);
    }

    #[test]
    fn decoupled_jacobian() {
        let r = joint_velocities(
            &Jacobian::identity(),
            &Twist {
                linear: Vec3::new(0.1, 0.0, 0.0),
                angular: Vec3::zeros(),
            },
        );
        assert_eq!(r.rates, JointVector::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let jac = Jacobian::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if jac.singular_values().min() < 0.05 {
                continue;
            }
            let xi = Twist::from_vector(&Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let r = joint_velocities(&jac, &xi);
            assert!(!r.damped);
            assert!((jac * r.rates - xi.to_vector()).norm() <= 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn singular_jacobian_is_damped_and_finite() {
        let mut jac = Jacobian::identity();
        jac[(5, 5)] = 0.0;
        let xi = Twist {
            linear: Vec3::zeros(),
            angular: Vec3::new(0.0, 0.0, 1.0),
        };
        let r = joint_velocities(&jac, &xi);
        assert!(r.damped);
        assert!(r.rates.iter().all(|v| v.is_finite()));
        assert_eq!(r.rates[5], 0.0);
    }

    #[test]
    fn step_at_target_is_stationary() {
        let chain = default_left_arm();
        let q = home_configuration();
        let target = chain.end_effector(&q).unwrap();
        let step = rmrc_step(&chain, &q, &target, &RateLimits::default());
        assert!(step.converged);
        assert_eq!(step.q_next, q);
    }

    #[test]
    fn first_step_moves_one_millimetre() {
        let chain = default_left_arm();
        let q = home_configuration();
        let ee = chain.end_effector(&q).unwrap();
        let target = Transform::new(ee.rotation, ee.translation + Vec3::new(0.01, 0.0, 0.0));
        let limits = RateLimits::default();
        let step = rmrc_step(&chain, &q, &target, &limits);
        let moved = chain.end_effector(&step.q_next).unwrap().translation - ee.translation;
        // ‖e_p‖ = 0.01 sits on the ramp; expected stride is v·dt.
        let v = scheduled_speed(0.01, limits.v_max, limits.v_min, limits.pos_tolerance, limits.pos_ramp_ratio);
        let stride = v * limits.dt;
        assert!((moved.norm() - stride).abs() <= 0.1 * stride, "moved {moved}");
        assert!(moved.x > 0.0);
    }

    #[test]
    fn track_converges_immediately_at_target() {
        let chain = default_left_arm();
        let q = home_configuration();
        let target = chain.end_effector(&q).unwrap();
        let r = track(&chain, &q, &target, &RateLimits::default(), 10).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.trajectory.len(), 1);
    }

    #[test]
    fn unreachable_target_reports_gap() {
        let chain = default_left_arm();
        let q = home_configuration();
        let shoulder = chain.shoulder();
        let reach = chain.reach_bound();
        let far = shoulder + Vec3::new(reach + 0.3, 0.0, 0.0);
        let target = Transform::new(Rotation::identity(), far);
        let r = track(&chain, &q, &target, &RateLimits::default(), 500).unwrap();
        assert!(!r.converged);
        assert_eq!(r.trajectory.len(), 501);
        assert!(r.final_error.position.norm() >= 0.3 - 1e-9);
    }

    #[test]
    fn limits_validation() {
        assert!(RateLimits::default().validate().is_ok());
        let bad = RateLimits {
            pos_ramp_ratio: 1.0,
            ..RateLimits::default()
        };
        assert!(bad.validate().is_err());
        let bad = RateLimits {
            v_min: 0.2,
            ..RateLimits::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn clamps_instead_of_failing() {
        let chain = default_left_arm();
        let mut q = home_configuration();
        let lim = chain.joints[1].limits.unwrap();
        q[1] = lim.upper;
        let ee = chain.end_effector(&q).unwrap();
        // Push upward, which needs more shoulder pitch.
        let target = Transform::new(ee.rotation, ee.translation + Vec3::new(0.0, 0.0, 0.3));
        let step = rmrc_step(&chain, &q, &target, &RateLimits::default());
        assert!(chain.check_limits(&step.q_next).is_ok());
    }
}
