//! Pinhole camera, pseudo-LiDAR lifting, patch cropping and SE(3) ego-motion
//! compensation.
//!
//! Camera coordinates are x right, y down, z forward. World coordinates used
//! by the simulator are x/y on the ground plane and z up.

mod boxes;
mod camera;
mod patch;
mod transform;

pub use boxes::{BBox2D, Box3D};
pub use camera::{CameraIntrinsics, DepthMap};
pub use patch::{crop_patch, lift_depth_map, PointCloud, PseudoLiDARPatch};
pub use transform::{compensate_ego_motion, pose_from_euler, RigidTransform};

pub use nalgebra::{Matrix3, Matrix4, Point3, Vector3};

/// Symmetric Chamfer distance between two point sets (mean of nearest
/// neighbour distances in both directions). Returns `None` when either set
/// is empty.
pub fn chamfer_distance(a: &[Point3<f64>], b: &[Point3<f64>]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let one_way = |from: &[Point3<f64>], to: &[Point3<f64>]| {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Some(0.5 * (one_way(a, b) + one_way(b, a)))
}
