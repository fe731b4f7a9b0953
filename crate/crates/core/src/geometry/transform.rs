use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Vector3};

use super::PseudoLiDARPatch;
use crate::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Homogeneous camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    matrix: Matrix4<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { matrix: Matrix4::identity() }
    }

    /// Validates bottom row `(0, 0, 0, 1)` and a proper rotation block.
    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite transform".into()));
        }
        let bottom = [matrix[(3, 0)], matrix[(3, 1)], matrix[(3, 2)], matrix[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidInput(format!("bottom row {bottom:?} is not (0,0,0,1)")));
        }
        let r: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let gram_err = (r.transpose() * r - Matrix3::identity()).amax();
        let det = r.determinant();
        if gram_err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!(
                "rotation block not orthonormal (gram error {gram_err:e}, det {det})"
            )));
        }
        Ok(Self { matrix })
    }

    /// Builds from row-major 16 values.
    pub fn from_row_major(values: &[f64; 16]) -> Result<Self> {
        Self::from_matrix(Matrix4::from_row_slice(values))
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self::from_matrix(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.matrix[(r, c)];
            }
        }
        out
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.matrix.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Closed-form rigid inverse `[R^T, -R^T t]`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Self { matrix: m }
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        let mut m = self.matrix * other.matrix;
        // Keep the bottom row exact.
        m[(3, 0)] = 0.0;
        m[(3, 1)] = 0.0;
        m[(3, 2)] = 0.0;
        m[(3, 3)] = 1.0;
        Self { matrix: m }
    }

    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        let m = &self.matrix;
        Point3::new(
            m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)] * p.z + m[(0, 3)],
            m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)] * p.z + m[(1, 3)],
            m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)] * p.z + m[(2, 3)],
        )
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * v
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Pose from translation (meters) and Euler angles (radians).
///
/// The rotation is `Rz(rz) * Ry(ry) * Rx(rx)` (intrinsic yaw, pitch, roll),
/// followed by the translation.
pub fn pose_from_euler(translation: [f64; 3], rotation: [f64; 3]) -> RigidTransform {
    let [rx, ry, rz] = rotation;
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), rz)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), ry)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), rx);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::from(translation));
    RigidTransform { matrix: m }
}

/// Maps a patch observed at frame `t - j` into the camera frame of `t`:
/// `p' = H_t^-1 * H_{t-j} * p`.
pub fn compensate_ego_motion(
    patch: &PseudoLiDARPatch,
    pose_t: &RigidTransform,
    pose_past: &RigidTransform,
) -> Result<PseudoLiDARPatch> {
    let pose_t = RigidTransform::from_matrix(pose_t.matrix)?;
    let pose_past = RigidTransform::from_matrix(pose_past.matrix)?;
    let rel = pose_t.inverse().compose(&pose_past);
    Ok(PseudoLiDARPatch {
        points: patch.points.iter().map(|p| rel.apply(p)).collect(),
        frame_index: patch.frame_index,
    })
}
