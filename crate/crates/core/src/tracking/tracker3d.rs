use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::assign::min_cost_assignment;
use super::kalman2d::symmetrize_checked;
use crate::geometry::Box3D;
use crate::{Error, Result};

type Vec10 = SVector<f64, 10>;
type Mat10 = SMatrix<f64, 10, 10>;
type Vec7 = SVector<f64, 7>;
type Mat7 = SMatrix<f64, 7, 7>;
type Mat7x10 = SMatrix<f64, 7, 10>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tracker3DParams {
    /// Center-distance gate for association, meters.
    pub gate: f64,
    pub min_hits: usize,
    pub max_age: usize,
    pub q_pos: f64,
    pub q_vel: f64,
    pub r_meas: f64,
    pub init_var: f64,
    pub init_vel_var: f64,
}

impl Default for Tracker3DParams {
    fn default() -> Self {
        Self {
            gate: 2.5,
            min_hits: 1,
            max_age: 3,
            q_pos: 0.05,
            q_vel: 0.05,
            r_meas: 0.5,
            init_var: 10.0,
            init_vel_var: 100.0,
        }
    }
}

/// Constant-velocity 3D box state `(x, y, z, yaw, l, w, h, vx, vy, vz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Track3DState {
    pub mean: Vec10,
    pub covariance: Mat10,
    pub id: u64,
    pub hits: usize,
    pub hit_streak: usize,
    pub time_since_update: usize,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn measurement(b: &Box3D) -> Vec7 {
    Vec7::from_column_slice(&[b.center[0], b.center[1], b.center[2], b.yaw, b.size[0], b.size[1], b.size[2]])
}

impl Track3DState {
    pub fn new(id: u64, b: &Box3D, p: &Tracker3DParams) -> Self {
        let mut mean = Vec10::zeros();
        mean.fixed_rows_mut::<7>(0).copy_from(&measurement(b));
        let mut diag = [p.init_var; 10];
        for d in diag.iter_mut().skip(7) {
            *d = p.init_vel_var;
        }
        Self {
            mean,
            covariance: Mat10::from_diagonal(&Vec10::from_column_slice(&diag)),
            id,
            hits: 1,
            hit_streak: 1,
            time_since_update: 0,
        }
    }

    pub fn bbox(&self) -> Box3D {
        Box3D {
            center: [self.mean[0], self.mean[1], self.mean[2]],
            size: [self.mean[4], self.mean[5], self.mean[6]],
            yaw: self.mean[3],
        }
    }

    fn predict(&mut self, p: &Tracker3DParams) {
        let mut f = Mat10::identity();
        for i in 0..3 {
            f[(i, 7 + i)] = 1.0;
        }
        let mut qd = [p.q_pos; 10];
        for q in qd.iter_mut().skip(7) {
            *q = p.q_vel;
        }
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + Mat10::from_diagonal(&Vec10::from_column_slice(&qd));
        if self.time_since_update > 0 {
            self.hit_streak = 0;
        }
        self.time_since_update += 1;
    }

    fn update(&mut self, b: &Box3D, p: &Tracker3DParams) -> Result<()> {
        let mut z = measurement(b);
        // Orientation correction: bring the measured yaw within 90 degrees
        // of the state (a box flipped by pi is the same box).
        let mut dyaw = wrap_angle(z[3] - self.mean[3]);
        if dyaw.abs() > PI / 2.0 {
            dyaw = wrap_angle(dyaw + PI);
        }
        z[3] = self.mean[3] + dyaw;

        let mut h = Mat7x10::zeros();
        for i in 0..7 {
            h[(i, i)] = 1.0;
        }
        let r = Mat7::identity() * p.r_meas;
        let s = h * self.covariance * h.transpose() + r;
        let si = s.try_inverse().ok_or_else(|| Error::Numeric("singular 3D innovation".into()))?;
        let k = self.covariance * h.transpose() * si;
        let ikh = Mat10::identity() - k * h;
        self.mean += k * (z - h * self.mean);
        self.mean[3] = wrap_angle(self.mean[3]);
        self.covariance = symmetrize_checked(ikh * self.covariance * ikh.transpose() + k * r * k.transpose())?;
        self.time_since_update = 0;
        self.hits += 1;
        self.hit_streak += 1;
        Ok(())
    }
}

/// A box with a track (or ground-truth) identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedBox {
    pub id: u64,
    pub bbox3d: Box3D,
}

/// Tracking-by-detection in 3D: constant-velocity Kalman filters associated
/// to detections by gated center distance. Returns, per frame, the posterior
/// boxes of tracks matched in that frame that satisfy the birth rule.
pub fn track_sequence_3d(frames: &[Vec<Box3D>], p: &Tracker3DParams) -> Result<Vec<Vec<TrackedBox>>> {
    let mut tracks: Vec<Track3DState> = Vec::new();
    let mut next_id = 1u64;
    let mut out = Vec::with_capacity(frames.len());
    for (f, dets) in frames.iter().enumerate() {
        for t in tracks.iter_mut() {
            t.predict(p);
        }
        let (nt, nd) = (tracks.len(), dets.len());
        let big = 1e6 * (1.0 + p.gate);
        let mut cost = vec![big; nt * nd];
        for (i, t) in tracks.iter().enumerate() {
            let c = [t.mean[0], t.mean[1], t.mean[2]];
            for (j, d) in dets.iter().enumerate() {
                let dist = ((c[0] - d.center[0]).powi(2) + (c[1] - d.center[1]).powi(2) + (c[2] - d.center[2]).powi(2)).sqrt();
                if dist <= p.gate {
                    cost[i * nd + j] = dist;
                }
            }
        }
        let assignment = min_cost_assignment(&cost, nt, nd);
        let mut det_used = vec![false; nd];
        let mut matched_tracks = vec![false; nt];
        for (i, a) in assignment.iter().enumerate() {
            if let Some(j) = *a {
                if cost[i * nd + j] <= p.gate {
                    tracks[i].update(&dets[j], p)?;
                    det_used[j] = true;
                    matched_tracks[i] = true;
                }
            }
        }
        for (j, d) in dets.iter().enumerate() {
            if !det_used[j] {
                tracks.push(Track3DState::new(next_id, d, p));
                matched_tracks.push(true);
                next_id += 1;
            }
        }
        let mut frame_out = Vec::new();
        for (t, &m) in tracks.iter().zip(&matched_tracks) {
            if m && (t.hit_streak >= p.min_hits || f < p.min_hits) {
                frame_out.push(TrackedBox { id: t.id, bbox3d: t.bbox() });
            }
        }
        out.push(frame_out);
        tracks.retain(|t| t.time_since_update <= p.max_age);
    }
    Ok(out)
}
