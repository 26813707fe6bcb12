//! Kinematic two-gripper caging.
//!
//! An object is caged when both grippers are closed, sit within the cage
//! radius of opposite faces of the box, and straddle its center. While caged
//! the object is rigidly attached to the frame midway between the grippers.
//! It drops out (frozen in place) when either gripper opens or the grippers
//! separate beyond the object's width plus twice the cage radius.

use serde::{Deserialize, Serialize};

use crate::kinematics::{Rotation, Transform, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    /// World pose of the box center.
    pub pose: Transform,
    pub half_extents: Vec3,
    pub graspable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspParams {
    /// Max distance from a gripper to its face, m.
    pub cage_radius: f64,
    /// Gripper opening below which it counts as closed.
    pub closed_below: f64,
    /// Gripper opening above which a caged grasp lets go.
    pub release_above: f64,
}

impl Default for GraspParams {
    fn default() -> Self {
        Self {
            cage_radius: 0.06,
            closed_below: 0.2,
            release_above: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspStatus {
    Free,
    Caged,
}

impl std::fmt::Display for GraspStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraspStatus::Free => "free",
            GraspStatus::Caged => "caged",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub object_id: u32,
    /// Object pose in the gripper-midpoint frame, fixed while caged.
    pub offset: Transform,
    /// Object width along the caging axis, m.
    pub width: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub attachment: Option<Attachment>,
}

impl GraspState {
    pub fn status(&self) -> GraspStatus {
        if self.attachment.is_some() {
            GraspStatus::Caged
        } else {
            GraspStatus::Free
        }
    }
}

/// Gripper positions (world) and openings, left then right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GripperPair {
    pub positions: [Vec3; 2],
    pub openings: [f64; 2],
}

/// Frame at the gripper midpoint with x from left to right gripper and z as
/// close as possible to `up`.
pub fn midpoint_frame(pair: &GripperPair, up: &Vec3, forward: &Vec3) -> Transform {
    let [a, b] = pair.positions;
    let origin = (a + b) * 0.5;
    let span = b - a;
    let Some(x) = span.try_normalize(1e-12) else {
        return Transform::new(Rotation::identity(), origin);
    };
    let reference = if x.cross(up).norm() > 1e-6 { *up } else { *forward };
    let z = (reference - x * reference.dot(&x)).normalize();
    let y = z.cross(&x);
    let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
    Transform::new(Rotation::from_matrix_unchecked(m), origin)
}

/// Distance from `p` (object frame) to the face of the box at `sign · h[axis]`.
fn face_distance(p: &Vec3, half: &Vec3, axis: usize, sign: f64) -> f64 {
    let mut d2 = (p[axis] - sign * half[axis]).powi(2);
    for j in (0..3).filter(|&j| j != axis) {
        d2 += (p[j].abs() - half[j]).max(0.0).powi(2);
    }
    d2.sqrt()
}

/// Caging axis in the object frame if the pair cages `obj`.
///
/// Ties between box axes go to the lowest index (x, then y, then z).
pub fn cage_axis(obj: &SceneObject, pair: &GripperPair, params: &GraspParams) -> Option<usize> {
    if !obj.graspable || pair.openings.iter().any(|o| *o >= params.closed_below) {
        return None;
    }
    let [a, b] = pair.positions;
    let c = obj.pose.translation;
    let between = (c - a).dot(&(b - a)) > 0.0 && (c - b).dot(&(a - b)) > 0.0;
    if !between {
        return None;
    }
    let inv = obj.pose.inverse();
    let pa = inv.transform_point(&a);
    let pb = inv.transform_point(&b);
    let h = obj.half_extents;
    let r = params.cage_radius;
    // Faces are opposite along the box axis the grippers are spread along.
    let span = pb - pa;
    let k = span.iamax();
    let sign = span[k].signum();
    (face_distance(&pa, &h, k, -sign) <= r && face_distance(&pb, &h, k, sign) <= r).then_some(k)
}

/// Updates the grasp for the current gripper pair and moves a caged object
/// with the midpoint frame.
pub fn grasp_check(
    grasp: &GraspState,
    objects: &mut [SceneObject],
    pair: &GripperPair,
    midpoint: &Transform,
    params: &GraspParams,
) -> GraspState {
    if let Some(att) = grasp.attachment {
        let separation = (pair.positions[1] - pair.positions[0]).norm();
        let opened = pair.openings.iter().any(|o| *o > params.release_above);
        if opened || separation > att.width + 2.0 * params.cage_radius {
            return GraspState::default();
        }
        if let Some(obj) = objects.iter_mut().find(|o| o.id == att.object_id) {
            obj.pose = midpoint.compose(&att.offset);
        }
        return *grasp;
    }
    for obj in objects.iter() {
        if let Some(k) = cage_axis(obj, pair, params) {
            return GraspState {
                attachment: Some(Attachment {
                    object_id: obj.id,
                    offset: midpoint.inverse().compose(&obj.pose),
                    width: 2.0 * obj.half_extents[k],
                }),
            };
        }
    }
    GraspState::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed() -> SceneObject {
        SceneObject {
            id: 1,
            pose: Transform::from_translation(Vec3::new(0.8, 0.0, -0.4)),
            half_extents: Vec3::new(0.05, 0.04, 0.03),
            graspable: true,
        }
    }

    fn straddle(gap: f64, openings: [f64; 2]) -> GripperPair {
        GripperPair {
            positions: [
                Vec3::new(0.8, 0.04 + gap, -0.4),
                Vec3::new(0.8, -0.04 - gap, -0.4),
            ],
            openings,
        }
    }

    fn mid(pair: &GripperPair) -> Transform {
        midpoint_frame(pair, &Vec3::z(), &Vec3::x())
    }

    #[test]
    fn open_grippers_do_not_cage() {
        let mut objs = vec![boxed()];
        let pair = straddle(0.02, [1.0, 1.0]);
        let g = grasp_check(&GraspState::default(), &mut objs, &pair, &mid(&pair), &GraspParams::default());
        assert_eq!(g.status(), GraspStatus::Free);
    }

    #[test]
    fn closed_straddle_cages_and_carries() {
        let params = GraspParams::default();
        let mut objs = vec![boxed()];
        let pair = straddle(0.02, [0.0, 0.0]);
        let g = grasp_check(&GraspState::default(), &mut objs, &pair, &mid(&pair), &params);
        assert_eq!(g.status(), GraspStatus::Caged);
        let att = g.attachment.unwrap();
        assert_eq!(att.width, 0.08);

        // Carry both grippers 0.3 m up and forward.
        let shift = Vec3::new(0.2, 0.0, 0.3);
        let moved = GripperPair {
            positions: [pair.positions[0] + shift, pair.positions[1] + shift],
            openings: pair.openings,
        };
        let m = mid(&moved);
        let g2 = grasp_check(&g, &mut objs, &moved, &m, &params);
        assert_eq!(g2.status(), GraspStatus::Caged);
        let rel = m.inverse().compose(&objs[0].pose);
        assert!((rel.translation - att.offset.translation).amax() < 1e-12);
        assert!((objs[0].pose.translation - (boxed().pose.translation + shift)).amax() < 1e-12);
    }

    #[test]
    fn pulling_apart_releases_and_freezes() {
        let params = GraspParams::default();
        let mut objs = vec![boxed()];
        let pair = straddle(0.02, [0.0, 0.0]);
        let g = grasp_check(&GraspState::default(), &mut objs, &pair, &mid(&pair), &params);
        let before = objs[0].pose;
        let mut apart = pair;
        apart.positions[1].y -= 0.1;
        let g2 = grasp_check(&g, &mut objs, &apart, &mid(&apart), &params);
        assert_eq!(g2.status(), GraspStatus::Free);
        assert_eq!(objs[0].pose, before);
    }

    #[test]
    fn opening_releases() {
        let params = GraspParams::default();
        let mut objs = vec![boxed()];
        let pair = straddle(0.02, [0.0, 0.0]);
        let g = grasp_check(&GraspState::default(), &mut objs, &pair, &mid(&pair), &params);
        let opened = straddle(0.02, [0.6, 0.0]);
        let g2 = grasp_check(&g, &mut objs, &opened, &mid(&opened), &params);
        assert_eq!(g2.status(), GraspStatus::Free);
    }

    #[test]
    fn far_or_same_side_grippers_do_not_cage() {
        let params = GraspParams::default();
        let far = straddle(0.1, [0.0, 0.0]);
        assert_eq!(cage_axis(&boxed(), &far, &params), None);
        let same_side = GripperPair {
            positions: [Vec3::new(0.8, 0.06, -0.4), Vec3::new(0.8, 0.1, -0.4)],
            openings: [0.0, 0.0],
        };
        assert_eq!(cage_axis(&boxed(), &same_side, &params), None);
    }

    #[test]
    fn midpoint_frame_is_a_rotation() {
        let pair = straddle(0.02, [0.0, 0.0]);
        let m = mid(&pair);
        assert!(crate::kinematics::orthonormality_defect(&m.rotation) < 1e-12);
        assert_eq!(m.translation, Vec3::new(0.8, 0.0, -0.4));
        let vertical = GripperPair {
            positions: [Vec3::zeros(), Vec3::new(0.0, 0.0, 0.2)],
            openings: [0.0, 0.0],
        };
        let m = mid(&vertical);
        assert!(crate::kinematics::orthonormality_defect(&m.rotation) < 1e-12);
    }
}
