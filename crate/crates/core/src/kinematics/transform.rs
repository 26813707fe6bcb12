//! Rigid-body transform algebra over 3x3 rotation matrices.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::KinematicsError;

pub type Vec3 = Vector3<f64>;
pub type Rotation = Rotation3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` before a rotation is re-projected.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Axis norms may deviate from one by at most this much.
pub const UNIT_AXIS_TOL: f64 = 1e-6;

/// A rigid pose: rotation followed by translation, equivalent to the
/// homogeneous matrix `[R t; 0 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Rotation::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Self {
            rotation,
            translation: Vec3::zeros(),
        }
    }

    /// `self ∘ other`: maps points from `other`'s child frame into `self`'s parent frame.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.inverse();
        Transform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Builds a transform from a homogeneous matrix. The rotation block is
    /// taken as-is; callers are responsible for it being orthonormal.
    pub fn from_homogeneous(m: &Matrix4<f64>) -> Transform {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        Transform {
            rotation: Rotation::from_matrix_unchecked(r),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Quaternion in `(w, x, y, z)` order.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&self.rotation);
        [q.w, q.i, q.j, q.k]
    }

    /// Builds a transform from a position and a `(w, x, y, z)` quaternion.
    /// The quaternion is normalized; a zero quaternion is rejected.
    pub fn from_position_quaternion(
        position: [f64; 3],
        wxyz: [f64; 4],
    ) -> Result<Transform, KinematicsError> {
        let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let n = q.norm();
        if !(n.is_finite() && n > 1e-12) || position.iter().any(|v| !v.is_finite()) {
            return Err(KinematicsError::NonFinite);
        }
        let uq = UnitQuaternion::from_quaternion(q);
        Ok(Transform {
            rotation: uq.to_rotation_matrix(),
            translation: Vec3::from(position),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// Re-projects the rotation onto SO(3) when it has drifted past [`ORTHONORMAL_TOL`].
    pub fn renormalized(mut self) -> Transform {
        if orthonormality_defect(&self.rotation) > ORTHONORMAL_TOL {
            self.rotation = project_to_rotation(self.rotation.matrix());
        }
        self
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<&Transform> for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

/// Largest deviation of `RᵀR` from identity, or of `det R` from one.
pub fn orthonormality_defect(r: &Rotation) -> f64 {
    let m = r.matrix();
    let gram = m.transpose() * m - Matrix3::identity();
    let det_err = (m.determinant() - 1.0).abs();
    gram.amax().max(det_err)
}

/// Nearest rotation matrix in the Frobenius sense (polar projection via SVD).
pub fn project_to_rotation(m: &Matrix3<f64>) -> Rotation {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fixed = u;
        u_fixed.column_mut(2).neg_mut();
        r = u_fixed * v_t;
    }
    Rotation::from_matrix_unchecked(r)
}

/// Rodrigues rotation about a unit `axis` by `angle` radians.
pub fn axis_angle_rotation(axis: &Vec3, angle: f64) -> Result<Rotation, KinematicsError> {
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(KinematicsError::NonUnitAxis { norm });
    }
    let k = axis / norm;
    let (s, c) = angle.sin_cos();
    let skew = k.cross_matrix();
    let m = Matrix3::identity() * c + skew * s + (k * k.transpose()) * (1.0 - c);
    Ok(Rotation::from_matrix_unchecked(m))
}

/// Rotation from roll/pitch/yaw, applied as `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn rotation_from_rpy(roll: f64, pitch: f64, yaw: f64) -> Rotation {
    Rotation::from_euler_angles(roll, pitch, yaw)
}

pub fn rotation_to_rpy(r: &Rotation) -> [f64; 3] {
    let (roll, pitch, yaw) = r.euler_angles();
    [roll, pitch, yaw]
}

/// Rotation angle in `[0, π]`.
pub fn rotation_angle(r: &Rotation) -> f64 {
    let m = r.matrix();
    let vee = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let c = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    (vee.norm() / 2.0).atan2(c)
}
