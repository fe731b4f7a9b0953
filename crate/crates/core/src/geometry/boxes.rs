use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned image box in pixel coordinates.
///
/// Pixel `(u, v)` belongs to the box when `x1 <= u < x2` and `y1 <= v < y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox2D {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = Self { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite());
        if !finite || self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(Error::InvalidInput(format!("degenerate box {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn contains_pixel(&self, u: usize, v: usize) -> bool {
        let (u, v) = (u as f64, v as f64);
        u >= self.x1 && u < self.x2 && v >= self.y1 && v < self.y2
    }

    /// Box from center, area and aspect (width / height).
    pub fn from_center_area_aspect(u: f64, v: f64, s: f64, r: f64) -> Self {
        let w = (s.max(0.0) * r.max(0.0)).sqrt();
        let h = if w > 0.0 { s / w } else { 0.0 };
        Self {
            x1: u - 0.5 * w,
            y1: v - 0.5 * h,
            x2: u + 0.5 * w,
            y2: v + 0.5 * h,
        }
    }

    /// Intersection with the image rectangle `[0, width) x [0, height)`.
    pub fn clamp_to_image(&self, width: usize, height: usize) -> Option<Self> {
        let b = Self {
            x1: self.x1.max(0.0),
            y1: self.y1.max(0.0),
            x2: self.x2.min(width as f64),
            y2: self.y2.min(height as f64),
        };
        (b.x1 < b.x2 && b.y1 < b.y2).then_some(b)
    }
}

/// Yawed 3D box in a z-up frame: bird's-eye view is the x/y plane and yaw is
/// the heading of the length axis measured from +x towards +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    /// (length, width, height) in meters.
    pub size: [f64; 3],
    pub yaw: f64,
}

impl Box3D {
    pub fn center_point(&self) -> Point3<f64> {
        Point3::new(self.center[0], self.center[1], self.center[2])
    }

    /// Footprint corners in counter-clockwise order.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = 0.5 * self.size[0];
        let hw = 0.5 * self.size[1];
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[a, b]| {
            [
                self.center[0] + c * a - s * b,
                self.center[1] + s * a + c * b,
            ]
        })
    }

    pub fn z_range(&self) -> (f64, f64) {
        let hh = 0.5 * self.size[2];
        (self.center[2] - hh, self.center[2] + hh)
    }

    pub fn volume(&self) -> f64 {
        self.size.iter().product()
    }

    /// Whether a world point lies inside the box.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let a = c * dx + s * dy;
        let b = -s * dx + c * dy;
        let dz = p[2] - self.center[2];
        a.abs() <= 0.5 * self.size[0] && b.abs() <= 0.5 * self.size[1] && dz.abs() <= 0.5 * self.size[2]
    }

    /// The eight corners.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let bev = self.bev_corners();
        let (z0, z1) = self.z_range();
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in bev.iter().enumerate() {
            out[i] = [*x, *y, z0];
            out[i + 4] = [*x, *y, z1];
        }
        out
    }
}
