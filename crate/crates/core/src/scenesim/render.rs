use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{BBox2D, Box3D, CameraIntrinsics, DepthMap, RigidTransform};

/// Ground-truth state of one vehicle in world coordinates (z up, ground at
/// z = 0, box bottom resting on the ground).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: u32,
    pub center: [f64; 3],
    /// (length, width, height) in meters.
    pub size: [f64; 3],
    pub yaw: f64,
    /// Ground-plane velocity, m/s.
    pub velocity: [f64; 2],
}

impl ObjectState {
    pub fn world_box(&self) -> Box3D {
        Box3D {
            center: self.center,
            size: self.size,
            yaw: self.yaw,
        }
    }

    /// State advanced by `t` seconds of constant-velocity motion.
    pub fn advanced(&self, t: f64) -> Self {
        let mut s = *self;
        s.center[0] += self.velocity[0] * t;
        s.center[1] += self.velocity[1] * t;
        s
    }
}

/// Per-pixel channels consumed by the appearance encoder: silhouette mask,
/// normalized column, normalized row, per-instance shading.
#[derive(Debug, Clone, PartialEq)]
pub struct Appearance {
    pub width: usize,
    pub height: usize,
    /// Pixel-interleaved (`height x width x CHANNELS`).
    pub data: Vec<f32>,
}

impl Appearance {
    pub const CHANNELS: usize = 4;

    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let i = (v * self.width + u) * Self::CHANNELS;
        &self.data[i..i + Self::CHANNELS]
    }
}

/// Raw output of one ray-casting pass.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub depth: DepthMap,
    /// Index into the object slice of the nearest hit, or `NO_OWNER`.
    pub owner: Vec<u32>,
    /// Per object: pixels whose ray hits it regardless of occlusion.
    pub projected_pixels: Vec<usize>,
}

pub const NO_OWNER: u32 = u32::MAX;

/// Ray parameter of the first entry into a yawed box, if any.
///
/// `origin` and `dir` are in world coordinates; returns `t` with
/// `origin + t * dir` on the box surface and `t > 0`.
#[inline]
pub(crate) fn ray_box_entry(origin: &Point3<f64>, dir: &Vector3<f64>, b: &Box3D) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    let ox = origin.x - b.center[0];
    let oy = origin.y - b.center[1];
    let oz = origin.z - b.center[2];
    let lo = [c * ox + s * oy, -s * ox + c * oy, oz];
    let ld = [c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z];
    let half = [0.5 * b.size[0], 0.5 * b.size[1], 0.5 * b.size[2]];
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        if ld[k].abs() < 1e-15 {
            if lo[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / ld[k];
        let mut t0 = (-half[k] - lo[k]) * inv;
        let mut t1 = (half[k] - lo[k]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > 0.0).then_some(t_near)
}

/// Pixel rectangle (half-open) that can contain the object's projection.
fn screen_bounds(cam: &CameraIntrinsics, world_to_cam: &RigidTransform, b: &Box3D) -> Option<(usize, usize, usize, usize)> {
    let corners = b.corners().map(|c| world_to_cam.apply(&Point3::new(c[0], c[1], c[2])));
    if corners.iter().all(|p| p.z <= 0.0) {
        return None;
    }
    if corners.iter().any(|p| p.z <= 1e-6) {
        return Some((0, 0, cam.width, cam.height));
    }
    let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &corners {
        let u = p.x * cam.fx / p.z + cam.cx;
        let v = p.y * cam.fy / p.z + cam.cy;
        u0 = u0.min(u);
        v0 = v0.min(v);
        u1 = u1.max(u);
        v1 = v1.max(v);
    }
    let clamp = |x: f64, hi: usize| x.max(0.0).min(hi as f64) as usize;
    let (a, b_, c, d) = (
        clamp(u0.floor(), cam.width),
        clamp(v0.floor(), cam.height),
        clamp(u1.ceil() + 1.0, cam.width),
        clamp(v1.ceil() + 1.0, cam.height),
    );
    (a < c && b_ < d).then_some((a, b_, c, d))
}

/// Z-buffer ray casting over the ground plane and every vehicle cuboid.
///
/// Depth is the camera-frame z of the nearest hit; rays that escape (sky)
/// or exceed `max_range` are sentinel.
pub fn render(pose: &RigidTransform, objects: &[ObjectState], cam: &CameraIntrinsics, max_range: f64) -> RenderOutput {
    let n_pix = cam.pixel_count();
    let mut depth = vec![f64::INFINITY; n_pix];
    let mut owner = vec![NO_OWNER; n_pix];
    let mut projected_pixels = vec![0usize; objects.len()];

    let origin = Point3::from(pose.translation());
    let rot = pose.rotation();
    let world_to_cam = pose.inverse();

    // Ground plane z = 0.
    if origin.z > 0.0 {
        for v in 0..cam.height {
            for u in 0..cam.width {
                let d = rot * cam.ray(u as f64, v as f64);
                if d.z < 0.0 {
                    let t = -origin.z / d.z;
                    depth[v * cam.width + u] = t;
                }
            }
        }
    }

    for (k, obj) in objects.iter().enumerate() {
        let b = obj.world_box();
        let Some((u0, v0, u1, v1)) = screen_bounds(cam, &world_to_cam, &b) else {
            continue;
        };
        for v in v0..v1 {
            for u in u0..u1 {
                let d = rot * cam.ray(u as f64, v as f64);
                if let Some(t) = ray_box_entry(&origin, &d, &b) {
                    if t > max_range {
                        continue;
                    }
                    projected_pixels[k] += 1;
                    let i = v * cam.width + u;
                    if t < depth[i] {
                        depth[i] = t;
                        owner[i] = k as u32;
                    }
                }
            }
        }
    }

    let values = depth
        .iter()
        .map(|&t| if t.is_finite() && t <= max_range { t as f32 } else { DepthMap::SENTINEL })
        .collect();
    RenderOutput {
        depth: DepthMap {
            width: cam.width,
            height: cam.height,
            values,
        },
        owner,
        projected_pixels,
    }
}

/// Noiseless depth rendering.
pub fn render_depth(pose: &RigidTransform, objects: &[ObjectState], cam: &CameraIntrinsics, max_range: f64) -> DepthMap {
    render(pose, objects, cam, max_range).depth
}

pub(crate) fn instance_shading(id: u32) -> f32 {
    let h = crate::scenesim::splitmix64(id as u64 ^ 0x5eed_5eed);
    0.25 + 0.75 * ((h >> 11) as f64 / (1u64 << 53) as f64) as f32
}

pub(crate) fn appearance_from_render(out: &RenderOutput, objects: &[ObjectState], cam: &CameraIntrinsics) -> Appearance {
    let (w, h) = (cam.width, cam.height);
    let mut data = vec![0.0f32; w * h * Appearance::CHANNELS];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let px = &mut data[i * Appearance::CHANNELS..(i + 1) * Appearance::CHANNELS];
            let o = out.owner[i];
            if o != NO_OWNER {
                px[0] = 1.0;
                px[3] = instance_shading(objects[o as usize].id);
            }
            px[1] = u as f32 / w as f32;
            px[2] = v as f32 / h as f32;
        }
    }
    Appearance { width: w, height: h, data }
}

/// Synthetic appearance channels. Carries silhouettes and image position
/// (perspective cues) but no depth channel.
pub fn render_appearance(pose: &RigidTransform, objects: &[ObjectState], cam: &CameraIntrinsics, max_range: f64) -> Appearance {
    let out = render(pose, objects, cam, max_range);
    appearance_from_render(&out, objects, cam)
}

/// Ground-truth annotation of one visible vehicle in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLabel {
    pub id: u32,
    pub bbox2d: BBox2D,
    /// Camera-frame z of the 3D box center.
    pub gt_depth: f64,
    /// Camera-frame 3D box center.
    pub center_cam: [f64; 3],
    pub box_world: Box3D,
    pub visibility: f64,
    pub visible_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelParams {
    pub visibility_threshold: f64,
    pub min_visible_pixels: usize,
    pub max_depth: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        let l = crate::scenesim::LabelConfig::default();
        Self {
            visibility_threshold: l.visibility_threshold,
            min_visible_pixels: l.min_visible_pixels,
            max_depth: l.max_depth,
        }
    }
}

pub(crate) fn labels_from_render(
    out: &RenderOutput,
    pose: &RigidTransform,
    objects: &[ObjectState],
    cam: &CameraIntrinsics,
    params: &LabelParams,
) -> Vec<ObjectLabel> {
    let n = objects.len();
    let mut visible = vec![0usize; n];
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n];
    for v in 0..cam.height {
        for u in 0..cam.width {
            let o = out.owner[v * cam.width + u];
            if o == NO_OWNER {
                continue;
            }
            let k = o as usize;
            visible[k] += 1;
            let b = &mut bounds[k];
            b.0 = b.0.min(u);
            b.1 = b.1.min(v);
            b.2 = b.2.max(u + 1);
            b.3 = b.3.max(v + 1);
        }
    }
    let world_to_cam = pose.inverse();
    let mut labels = Vec::new();
    for (k, obj) in objects.iter().enumerate() {
        if visible[k] == 0 || out.projected_pixels[k] == 0 {
            continue;
        }
        let visibility = visible[k] as f64 / out.projected_pixels[k] as f64;
        if visibility < params.visibility_threshold || visible[k] < params.min_visible_pixels {
            continue;
        }
        let c = world_to_cam.apply(&Point3::new(obj.center[0], obj.center[1], obj.center[2]));
        if c.z <= 0.0 || c.z > params.max_depth {
            continue;
        }
        let (x1, y1, x2, y2) = bounds[k];
        labels.push(ObjectLabel {
            id: obj.id,
            bbox2d: BBox2D {
                x1: x1 as f64,
                y1: y1 as f64,
                x2: x2 as f64,
                y2: y2 as f64,
            },
            gt_depth: c.z,
            center_cam: [c.x, c.y, c.z],
            box_world: obj.world_box(),
            visibility,
            visible_pixels: visible[k],
        });
    }
    labels
}

/// Labels every sufficiently visible vehicle: tight 2D box of its visible
/// pixels, camera-frame center depth, and visibility fraction.
pub fn label_objects(
    pose: &RigidTransform,
    objects: &[ObjectState],
    cam: &CameraIntrinsics,
    max_range: f64,
    params: &LabelParams,
) -> Vec<ObjectLabel> {
    let out = render(pose, objects, cam, max_range);
    labels_from_render(&out, pose, objects, cam, params)
}
