use nalgebra::Point3;

use super::{BBox2D, CameraIntrinsics, DepthMap};
use crate::Result;

/// Pseudo-LiDAR cloud with the source pixel of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub pixels: Vec<(usize, usize)>,
}

/// Points lifted from the pixels inside one object's 2D box.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLiDARPatch {
    pub points: Vec<Point3<f64>>,
    pub frame_index: usize,
}

impl PseudoLiDARPatch {
    pub fn new(points: Vec<Point3<f64>>, frame_index: usize) -> Self {
        Self { points, frame_index }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }
}

/// Lifts every non-sentinel pixel to a camera-frame point:
/// `x = (u - cx) z / fx`, `y = (v - cy) z / fy`, `z = d(u, v)`.
pub fn lift_depth_map(depth: &DepthMap, cam: &CameraIntrinsics) -> Result<PointCloud> {
    depth.check_camera(cam)?;
    let mut points = Vec::with_capacity(depth.valid_count());
    let mut pixels = Vec::with_capacity(points.capacity());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v);
            if z != DepthMap::SENTINEL {
                points.push(cam.unproject(u as f64, v as f64, z as f64));
                pixels.push((u, v));
            }
        }
    }
    Ok(PointCloud { points, pixels })
}

/// Crops the pseudo-LiDAR points whose pixel lies in `bbox` (half-open).
/// A box entirely outside the image yields an empty patch.
pub fn crop_patch(
    depth: &DepthMap,
    cam: &CameraIntrinsics,
    bbox: &BBox2D,
    frame_index: usize,
) -> Result<PseudoLiDARPatch> {
    depth.check_camera(cam)?;
    let Some(b) = bbox.clamp_to_image(depth.width, depth.height) else {
        return Ok(PseudoLiDARPatch::new(Vec::new(), frame_index));
    };
    let u0 = b.x1.ceil() as usize;
    let v0 = b.y1.ceil() as usize;
    let u1 = (b.x2.ceil() as usize).min(depth.width);
    let v1 = (b.y2.ceil() as usize).min(depth.height);
    let mut points = Vec::new();
    for v in v0..v1 {
        for u in u0..u1 {
            if !bbox.contains_pixel(u, v) {
                continue;
            }
            let z = depth.get(u, v);
            if z != DepthMap::SENTINEL {
                points.push(cam.unproject(u as f64, v as f64, z as f64));
            }
        }
    }
    Ok(PseudoLiDARPatch::new(points, frame_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let d = DepthMap::empty(4, 4);
        assert!(lift_depth_map(&d, &cam(5, 4)).is_err());
        assert!(crop_patch(&d, &cam(4, 5), &BBox2D::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn principal_pixel_lifts_to_axis() {
        let c = CameraIntrinsics::new(100.0, 100.0, 2.0, 1.0, 4, 4).unwrap();
        let mut d = DepthMap::empty(4, 4);
        d.set(2, 1, 5.0);
        let cloud = lift_depth_map(&d, &c).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(0.0, 0.0, 5.0)]);
        assert_eq!(cloud.pixels, vec![(2, 1)]);
    }

    #[test]
    fn substitution_example() {
        let c = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 200, 100).unwrap();
        let mut d = DepthMap::empty(200, 100);
        d.set(150, 50, 10.0);
        let cloud = lift_depth_map(&d, &c).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(10.0, 0.0, 10.0)]);
    }

    #[test]
    fn box_outside_image_gives_empty_patch() {
        let d = DepthMap::new(4, 4, vec![1.0; 16]).unwrap();
        let b = BBox2D::new(10.0, 10.0, 20.0, 20.0).unwrap();
        assert!(crop_patch(&d, &cam(4, 4), &b, 3).unwrap().is_empty());
    }

    #[test]
    fn sentinel_only_box_gives_empty_patch() {
        let mut d = DepthMap::new(4, 4, vec![1.0; 16]).unwrap();
        d.set(0, 0, 0.0);
        let b = BBox2D::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(crop_patch(&d, &cam(4, 4), &b, 0).unwrap().is_empty());
    }

    #[test]
    fn fractional_box_uses_pixel_centers() {
        let d = DepthMap::new(10, 10, vec![2.0; 100]).unwrap();
        // Pixel centers 2, 3, 4 in both axes fall in [1.5, 4.5).
        let b = BBox2D::new(1.5, 1.5, 4.5, 4.5).unwrap();
        assert_eq!(crop_patch(&d, &cam(10, 10), &b, 0).unwrap().len(), 9);
    }
}
