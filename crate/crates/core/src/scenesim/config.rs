use serde::{Deserialize, Serialize};

use crate::geometry::CameraIntrinsics;
use crate::{Error, Result};

/// Everything that shapes a generated sequence. Serialized into every
/// archive so downstream stages see the exact generating configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub frames: usize,
    /// Seconds between frames.
    pub dt: f64,
    pub camera: CameraConfig,
    pub ego: EgoConfig,
    pub traffic: TrafficConfig,
    pub noise: NoiseConfig,
    pub labels: LabelConfig,
    /// Returns beyond this camera depth render as "no return".
    pub max_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Nominal height of the optical center above the ground plane, meters.
    pub mount_height: f64,
    /// Per-sequence relative jitter of the mount height (uniform, +-), standing
    /// in for vehicle-to-vehicle mounting and road-grade differences.
    pub mount_height_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoConfig {
    pub speed_min: f64,
    pub speed_max: f64,
    pub accel_max: f64,
    pub jerk_max: f64,
    /// Curvature is redrawn uniformly in `[-curvature_max, curvature_max]`
    /// every `curvature_segment_frames` frames.
    pub curvature_max: f64,
    pub curvature_segment_frames: usize,
    /// Stationary std (radians) of the AR(1) camera pitch oscillation.
    pub pitch_std: f64,
    /// Frame-to-frame correlation of the pitch process, in `[0, 1)`.
    pub pitch_correlation: f64,
    /// Std (radians) of independent per-frame camera yaw shake about the
    /// vehicle heading.
    pub yaw_jitter_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub parked: usize,
    pub moving: usize,
    pub moving_speed_min: f64,
    pub moving_speed_max: f64,
    /// Nominal (length, width, height) in meters.
    pub nominal_size: [f64; 3],
    /// Relative half-range of the uniform size jitter.
    pub size_jitter: f64,
    /// Arc-length window ahead of the ego start where vehicles spawn.
    pub spawn_ahead_min: f64,
    pub spawn_ahead_max: f64,
    /// Lateral offsets of the parking rows (right is negative).
    pub parked_offset_min: f64,
    pub parked_offset_max: f64,
    /// Lateral offset of the two travel lanes.
    pub lane_offset: f64,
    pub min_separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Target mean |relative error| of the i.i.d. per-pixel noise.
    pub pixel_rel_error: f64,
    /// Std of a per-object, per-frame multiplicative depth bias applied to
    /// the pixels each vehicle owns (structured estimator error).
    pub object_rel_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub visibility_threshold: f64,
    pub min_visible_pixels: usize,
    pub max_depth: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            frames: 12,
            dt: 0.25,
            camera: CameraConfig::default(),
            ego: EgoConfig::default(),
            traffic: TrafficConfig::default(),
            noise: NoiseConfig::default(),
            labels: LabelConfig::default(),
            max_range: 120.0,
        }
    }
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fx: 400.0,
            fy: 400.0,
            cx: 192.0,
            cy: 64.0,
            width: 384,
            height: 128,
            mount_height: 1.6,
            mount_height_jitter: 0.1,
        }
    }
}

impl Default for EgoConfig {
    fn default() -> Self {
        Self {
            speed_min: 2.0,
            speed_max: 16.0,
            accel_max: 2.0,
            jerk_max: 2.0,
            curvature_max: 0.002,
            curvature_segment_frames: 8,
            pitch_std: 0.006,
            pitch_correlation: 0.95,
            yaw_jitter_std: 0.0,
        }
    }
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            parked: 10,
            moving: 4,
            moving_speed_min: 2.0,
            moving_speed_max: 8.0,
            nominal_size: [4.5, 1.9, 1.6],
            size_jitter: 0.1,
            spawn_ahead_min: 12.0,
            spawn_ahead_max: 60.0,
            parked_offset_min: 5.5,
            parked_offset_max: 7.5,
            lane_offset: 3.5,
            min_separation: 7.0,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pixel_rel_error: 0.08,
            object_rel_std: 0.06,
        }
    }
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            visibility_threshold: 0.25,
            min_visible_pixels: 24,
            max_depth: 60.0,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.frames >= 1, "frames", "must be at least 1")?;
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be positive")?;
        check(self.max_range > 0.0, "max_range", "must be positive")?;
        self.camera
            .intrinsics()
            .map_err(|e| Error::config("camera", e.to_string()))?;
        check(self.camera.mount_height > 0.0, "camera.mount_height", "must be positive")?;
        check(
            (0.0..1.0).contains(&self.camera.mount_height_jitter),
            "camera.mount_height_jitter",
            "must lie in [0, 1)",
        )?;

        let e = &self.ego;
        check(e.speed_min >= 0.0, "ego.speed_min", "must be non-negative")?;
        check(e.speed_max >= e.speed_min, "ego.speed_max", "must be >= speed_min")?;
        check(e.accel_max >= 0.0, "ego.accel_max", "must be non-negative")?;
        check(e.jerk_max >= 0.0, "ego.jerk_max", "must be non-negative")?;
        check(e.curvature_max >= 0.0, "ego.curvature_max", "must be non-negative")?;
        check(e.curvature_segment_frames >= 1, "ego.curvature_segment_frames", "must be at least 1")?;
        check(e.pitch_std >= 0.0, "ego.pitch_std", "must be non-negative")?;
        check(e.yaw_jitter_std >= 0.0 && e.yaw_jitter_std.is_finite(), "ego.yaw_jitter_std", "must be non-negative")?;
        check(
            (0.0..1.0).contains(&e.pitch_correlation),
            "ego.pitch_correlation",
            "must lie in [0, 1)",
        )?;

        let t = &self.traffic;
        check(t.moving_speed_min >= 0.0, "traffic.moving_speed_min", "must be non-negative")?;
        check(
            t.moving_speed_max >= t.moving_speed_min,
            "traffic.moving_speed_max",
            "must be >= moving_speed_min",
        )?;
        check(t.nominal_size.iter().all(|&s| s > 0.0), "traffic.nominal_size", "must be positive")?;
        check((0.0..1.0).contains(&t.size_jitter), "traffic.size_jitter", "must lie in [0, 1)")?;
        check(t.spawn_ahead_min >= 0.0, "traffic.spawn_ahead_min", "must be non-negative")?;
        check(
            t.spawn_ahead_max > t.spawn_ahead_min,
            "traffic.spawn_ahead_max",
            "must exceed spawn_ahead_min",
        )?;
        check(
            t.parked_offset_min > 0.0 && t.parked_offset_max >= t.parked_offset_min,
            "traffic.parked_offset_min",
            "offsets must be positive and ordered",
        )?;
        check(t.min_separation >= 0.0, "traffic.min_separation", "must be non-negative")?;

        check(self.noise.pixel_rel_error >= 0.0, "noise.pixel_rel_error", "must be non-negative")?;
        check(self.noise.object_rel_std >= 0.0, "noise.object_rel_std", "must be non-negative")?;

        let l = &self.labels;
        check(
            (0.0..=1.0).contains(&l.visibility_threshold),
            "labels.visibility_threshold",
            "must lie in [0, 1]",
        )?;
        check(l.max_depth > 0.0, "labels.max_depth", "must be positive")?;
        Ok(())
    }
}
