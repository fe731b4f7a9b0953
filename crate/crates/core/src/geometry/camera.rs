use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole intrinsics plus image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self { fx, fy, cx, cy, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) || !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidInput(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Back-projects pixel `(u, v)` at depth `z`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point3<f64> {
        Point3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Projects a camera-frame point to `(u, v, depth)`.
    pub fn project(&self, p: &Point3<f64>) -> Result<(f64, f64, f64)> {
        if !(p.z > 0.0) {
            return Err(Error::InvalidInput(format!("point behind camera (z = {})", p.z)));
        }
        Ok((p.x * self.fx / p.z + self.cx, p.y * self.fy / p.z + self.cy, p.z))
    }

    /// Ray direction through pixel `(u, v)` scaled so its z component is 1.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Dense depth image in meters, row-major. `0.0` marks "no return".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl DepthMap {
    pub const SENTINEL: f32 = 0.0;

    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        let map = Self { width, height, values };
        map.validate()?;
        Ok(map)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![Self::SENTINEL; width * height],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.width * self.height {
            return Err(Error::DimensionMismatch(format!(
                "depth map has {} values for {}x{}",
                self.values.len(),
                self.width,
                self.height
            )));
        }
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid depth value {bad}")));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, z: f32) {
        self.values[v * self.width + u] = z;
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&z| z != Self::SENTINEL).count()
    }

    pub(crate) fn check_camera(&self, cam: &CameraIntrinsics) -> Result<()> {
        if self.width != cam.width || self.height != cam.height {
            return Err(Error::DimensionMismatch(format!(
                "depth map {}x{} vs camera {}x{}",
                self.width, self.height, cam.width, cam.height
            )));
        }
        Ok(())
    }
}
