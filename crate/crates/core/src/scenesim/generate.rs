use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::noise::{apply_object_bias, corrupt_depth};
use super::render::{appearance_from_render, labels_from_render, render, Appearance, LabelParams, ObjectLabel, ObjectState};
use super::{derive_seed, SceneConfig};
use crate::geometry::{pose_from_euler, CameraIntrinsics, DepthMap, RigidTransform};
use crate::{par, Result};

/// One rendered frame with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub frame_index: usize,
    /// Camera-to-world pose.
    pub ego_pose: RigidTransform,
    pub depth_clean: DepthMap,
    pub depth_noisy: DepthMap,
    pub appearance: Appearance,
    /// Labels of the sufficiently visible vehicles.
    pub objects: Vec<ObjectLabel>,
    /// World states of every vehicle in the scene at this frame.
    pub states: Vec<ObjectState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub frames: Vec<FrameObservation>,
    pub intrinsics: CameraIntrinsics,
    pub seed: u64,
    pub config: SceneConfig,
}

impl Sequence {
    pub fn dt(&self) -> f64 {
        self.config.dt
    }
}

/// Ground-vehicle pose of the ego at one frame.
#[derive(Debug, Clone, Copy)]
struct EgoState {
    x: f64,
    y: f64,
    heading: f64,
    pitch: f64,
}

/// Camera-to-world pose for a camera mounted at `height` on a vehicle at
/// `(x, y)` heading `heading`, pitched up by `pitch`.
pub fn camera_pose(x: f64, y: f64, heading: f64, pitch: f64, height: f64) -> RigidTransform {
    // Camera (x right, y down, z forward) to world (z up):
    // Rz(heading - pi/2) * Rx(pitch - pi/2).
    pose_from_euler([x, y, height], [pitch - FRAC_PI_2, 0.0, heading - FRAC_PI_2])
}

fn ego_trajectory(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<EgoState> {
    let e = &cfg.ego;
    let mut speed = if e.speed_max > e.speed_min {
        rng.random_range(e.speed_min..=e.speed_max)
    } else {
        e.speed_min
    };
    let mut accel = 0.0;
    let mut curvature = 0.0;
    let (mut x, mut y, mut heading) = (0.0, 0.0, 0.0);
    let innovation = (1.0 - e.pitch_correlation * e.pitch_correlation).sqrt() * e.pitch_std;
    let mut pitch = e.pitch_std * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(cfg.frames);
    for k in 0..cfg.frames {
        out.push(EgoState { x, y, heading, pitch });
        if k % e.curvature_segment_frames == 0 && e.curvature_max > 0.0 {
            curvature = rng.random_range(-e.curvature_max..=e.curvature_max);
        }
        if e.jerk_max > 0.0 {
            let jerk = rng.random_range(-e.jerk_max..=e.jerk_max);
            accel = (accel + jerk * cfg.dt).clamp(-e.accel_max, e.accel_max);
        }
        speed = (speed + accel * cfg.dt).clamp(e.speed_min, e.speed_max);
        heading += speed * curvature * cfg.dt;
        x += speed * cfg.dt * heading.cos();
        y += speed * cfg.dt * heading.sin();
        pitch = e.pitch_correlation * pitch + innovation * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Arc-length parametrized polyline through the ego positions, extended
/// straight ahead past the last frame.
struct Path {
    pts: Vec<(f64, f64)>,
    s: Vec<f64>,
}

impl Path {
    fn new(ego: &[EgoState], extension: f64) -> Self {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for e in ego {
            if pts.last().is_none_or(|p: &(f64, f64)| (p.0 - e.x).hypot(p.1 - e.y) > 1e-6) {
                pts.push((e.x, e.y));
            }
        }
        let last = ego.last().expect("at least one frame");
        let end = pts.last().copied().unwrap();
        pts.push((end.0 + extension * last.heading.cos(), end.1 + extension * last.heading.sin()));
        let mut s = vec![0.0];
        for w in pts.windows(2) {
            s.push(s.last().unwrap() + (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1));
        }
        Self { pts, s }
    }

    fn length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Position and heading at arc length `s`.
    fn at(&self, s: f64) -> (f64, f64, f64) {
        let s = s.clamp(0.0, self.length());
        let i = match self.s.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.pts.len() - 2),
            Err(i) => (i - 1).min(self.pts.len() - 2),
        };
        let (a, b) = (self.pts[i], self.pts[i + 1]);
        let seg = self.s[i + 1] - self.s[i];
        let f = if seg > 0.0 { (s - self.s[i]) / seg } else { 0.0 };
        let heading = (b.1 - a.1).atan2(b.0 - a.0);
        (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1), heading)
    }
}

fn sample_size(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let j = cfg.traffic.size_jitter;
    cfg.traffic.nominal_size.map(|s| {
        if j > 0.0 {
            s * (1.0 + rng.random_range(-j..=j))
        } else {
            s
        }
    })
}

fn spawn_objects(cfg: &SceneConfig, ego: &[EgoState], rng: &mut ChaCha8Rng) -> Vec<ObjectState> {
    let t = &cfg.traffic;
    let path = Path::new(ego, t.spawn_ahead_max);
    let s_lo = t.spawn_ahead_min;
    let s_hi = path.length().max(s_lo + 1.0);
    let mut objects: Vec<ObjectState> = Vec::new();
    const ATTEMPTS: usize = 60;

    let clear_of_others = |cand: &ObjectState, objects: &[ObjectState]| {
        (0..cfg.frames).all(|k| {
            let tk = k as f64 * cfg.dt;
            let c = cand.advanced(tk);
            let e = &ego[k];
            let ego_gap = (c.center[0] - e.x).hypot(c.center[1] - e.y);
            ego_gap > 4.0
                && objects.iter().all(|o| {
                    let o = o.advanced(tk);
                    (o.center[0] - c.center[0]).hypot(o.center[1] - c.center[1]) >= t.min_separation
                })
        })
    };

    let total = t.parked + t.moving;
    for n in 0..total {
        let parked = n < t.parked;
        for _ in 0..ATTEMPTS {
            let s = rng.random_range(s_lo..s_hi);
            let (px, py, heading) = path.at(s);
            let size = sample_size(cfg, rng);
            let (offset, yaw, velocity) = if parked {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let perpendicular = rng.random_bool(0.25);
                let mut off = rng.random_range(t.parked_offset_min..=t.parked_offset_max);
                let mut yaw = heading + rng.random_range(-0.35..=0.35);
                if perpendicular {
                    off += 0.5 * (size[0] - size[1]);
                    yaw += FRAC_PI_2;
                }
                (side * off, yaw, [0.0, 0.0])
            } else {
                let oncoming = rng.random_bool(0.5);
                let speed = if t.moving_speed_max > t.moving_speed_min {
                    rng.random_range(t.moving_speed_min..=t.moving_speed_max)
                } else {
                    t.moving_speed_min
                };
                let dir = if oncoming { heading + PI } else { heading };
                let jitter = 0.02 * rng.sample::<f64, _>(StandardNormal);
                let side = if oncoming { 1.0 } else { -1.0 };
                let v = [speed * (dir + jitter).cos(), speed * (dir + jitter).sin()];
                (side * t.lane_offset, dir + jitter, v)
            };
            let (nx, ny) = (-heading.sin(), heading.cos());
            let cand = ObjectState {
                id: n as u32 + 1,
                center: [px + offset * nx, py + offset * ny, 0.5 * size[2]],
                size,
                yaw,
                velocity,
            };
            if clear_of_others(&cand, &objects) {
                objects.push(cand);
                break;
            }
        }
    }
    objects
}

fn frame_seed(seed: u64, frame: usize, stream: u64) -> u64 {
    derive_seed(derive_seed(seed, stream), frame as u64)
}

/// Camera height above ground used for every frame of the sequence with this seed.
pub fn sequence_mount_height(config: &SceneConfig, seed: u64) -> f64 {
    let j = config.camera.mount_height_jitter;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let f = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
    config.camera.mount_height * (1.0 + f)
}

/// Generates a sequence; a pure function of `(config, seed)`.
pub fn generate_sequence(config: &SceneConfig, seed: u64) -> Result<Sequence> {
    config.validate()?;
    let cam = config.camera.intrinsics()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let ego = ego_trajectory(config, &mut rng);
    let objects = spawn_objects(config, &ego, &mut rng);
    let mount_height = sequence_mount_height(config, seed);
    let mut shake_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let yaw_shake: Vec<f64> =
        (0..config.frames).map(|_| config.ego.yaw_jitter_std * shake_rng.sample::<f64, _>(StandardNormal)).collect();
    let label_params = LabelParams {
        visibility_threshold: config.labels.visibility_threshold,
        min_visible_pixels: config.labels.min_visible_pixels,
        max_depth: config.labels.max_depth,
    };

    let frames = par::map_range(config.frames, |k| {
        let e = ego[k];
        let pose = camera_pose(e.x, e.y, e.heading + yaw_shake[k], e.pitch, mount_height);
        let t = k as f64 * config.dt;
        let states: Vec<ObjectState> = objects.iter().map(|o| o.advanced(t)).collect();
        let out = render(&pose, &states, &cam, config.max_range);
        let biased = apply_object_bias(&out, states.len(), config.noise.object_rel_std, frame_seed(seed, k, 1));
        let depth_noisy = corrupt_depth(&biased, config.noise.pixel_rel_error, frame_seed(seed, k, 2));
        let appearance = appearance_from_render(&out, &states, &cam);
        let labels = labels_from_render(&out, &pose, &states, &cam, &label_params);
        FrameObservation {
            frame_index: k,
            ego_pose: pose,
            depth_clean: out.depth,
            depth_noisy,
            appearance,
            objects: labels,
            states,
        }
    });

    Ok(Sequence {
        frames,
        intrinsics: cam,
        seed,
        config: config.clone(),
    })
}
