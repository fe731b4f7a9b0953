use nalgebra::{SMatrix, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::geometry::BBox2D;
use crate::{Error, Result};

pub type Vec7 = SVector<f64, 7>;
pub type Mat7 = SMatrix<f64, 7, 7>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat4x7 = SMatrix<f64, 4, 7>;

/// Most negative eigenvalue tolerated after re-symmetrization.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Noise model of the image-plane filter. Area and aspect variances are
/// derived from the pixel variances and the current box size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanParams2D {
    /// Process variance of the box center, px^2 per frame.
    pub q_pos: f64,
    /// Process variance of the velocities, (px/frame)^2 per frame.
    pub q_vel: f64,
    /// Measurement variance of the box center, px^2.
    pub r_pos: f64,
    pub init_pos_var: f64,
    pub init_vel_var: f64,
}

impl Default for KalmanParams2D {
    fn default() -> Self {
        Self {
            q_pos: 1.0,
            q_vel: 0.25,
            r_pos: 1.0,
            init_pos_var: 10.0,
            init_vel_var: 1000.0,
        }
    }
}

/// SORT-style state: center, area, aspect (w/h) and velocities of the first
/// three. Aspect is modelled static.
#[derive(Debug, Clone, PartialEq)]
pub struct Track2DState {
    pub mean: Vec7,
    pub covariance: Mat7,
    pub id: u64,
    pub age: usize,
    pub hits: usize,
    pub hit_streak: usize,
    pub time_since_update: usize,
}

pub(crate) fn box_to_measurement(b: &BBox2D) -> Vec4 {
    let (u, v) = b.center();
    Vec4::new(u, v, b.area(), b.width() / b.height())
}

pub fn transition() -> Mat7 {
    let mut f = Mat7::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

pub fn observation() -> Mat4x7 {
    let mut h = Mat4x7::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Variance of area and aspect induced by a one-pixel change in side length.
fn size_scales(s: f64, r: f64) -> (f64, f64) {
    let s = s.max(1.0);
    let r = r.max(1e-3);
    (4.0 * s, r / s)
}

pub fn process_noise(mean: &Vec7, p: &KalmanParams2D) -> Mat7 {
    let (ks, kr) = size_scales(mean[2], mean[3]);
    Mat7::from_diagonal(&Vec7::from_column_slice(&[
        p.q_pos,
        p.q_pos,
        p.q_pos * ks,
        p.q_pos * kr,
        p.q_vel,
        p.q_vel,
        p.q_vel * ks,
    ]))
}

pub fn measurement_noise(z: &Vec4, p: &KalmanParams2D) -> Mat4 {
    let (ks, kr) = size_scales(z[2], z[3]);
    Mat4::from_diagonal(&Vec4::new(p.r_pos, p.r_pos, p.r_pos * ks, p.r_pos * kr))
}

impl Track2DState {
    pub fn new(id: u64, b: &BBox2D, p: &KalmanParams2D) -> Self {
        let z = box_to_measurement(b);
        let mut mean = Vec7::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let (ks, kr) = size_scales(z[2], z[3]);
        let diag = [
            p.init_pos_var,
            p.init_pos_var,
            p.init_pos_var * ks,
            p.init_pos_var * kr,
            p.init_vel_var,
            p.init_vel_var,
            p.init_vel_var * ks,
        ];
        Self {
            mean,
            covariance: Mat7::from_diagonal(&Vec7::from_column_slice(&diag)),
            id,
            age: 0,
            hits: 1,
            hit_streak: 1,
            time_since_update: 0,
        }
    }

    pub fn bbox(&self) -> BBox2D {
        BBox2D::from_center_area_aspect(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }
}

/// Constant-velocity prediction: `x <- F x`, `P <- F P F^T + Q`.
pub fn kalman_predict(state: &Track2DState, p: &KalmanParams2D) -> Track2DState {
    let mut s = state.clone();
    if s.mean[2] + s.mean[6] <= 0.0 {
        s.mean[6] = 0.0;
    }
    let f = transition();
    let q = process_noise(&s.mean, p);
    s.mean = f * s.mean;
    s.covariance = f * s.covariance * f.transpose() + q;
    s.age += 1;
    if s.time_since_update > 0 {
        s.hit_streak = 0;
    }
    s.time_since_update += 1;
    s
}

pub(crate) fn symmetrize_checked<const N: usize>(p: SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    let sym = (p + p.transpose()) * 0.5;
    let dynamic = nalgebra::DMatrix::from_column_slice(N, N, sym.as_slice());
    let min_eig = SymmetricEigen::new(dynamic).eigenvalues.min();
    if min_eig < -PSD_TOLERANCE || !min_eig.is_finite() {
        return Err(Error::Numeric(format!("covariance lost positive semi-definiteness (min eigenvalue {min_eig:e})")));
    }
    Ok(sym)
}

/// Normalized innovation squared of a measurement against a predicted state.
pub fn innovation_nis(state: &Track2DState, b: &BBox2D, p: &KalmanParams2D) -> f64 {
    let z = box_to_measurement(b);
    let h = observation();
    let y = z - h * state.mean;
    let s = h * state.covariance * h.transpose() + measurement_noise(&z, p);
    match s.try_inverse() {
        Some(si) => (y.transpose() * si * y)[(0, 0)],
        None => f64::INFINITY,
    }
}

/// Standard Kalman update with measurement `(u, v, s, r)` in Joseph form.
pub fn kalman_update(state: &Track2DState, b: &BBox2D, p: &KalmanParams2D) -> Result<Track2DState> {
    b.validate()?;
    let z = box_to_measurement(b);
    let h = observation();
    let r = measurement_noise(&z, p);
    let pm = &state.covariance;
    let s_mat = h * pm * h.transpose() + r;
    let s_inv = s_mat
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular innovation covariance".into()))?;
    let k = pm * h.transpose() * s_inv;
    let y = z - h * state.mean;
    let ikh = Mat7::identity() - k * h;
    let cov = ikh * pm * ikh.transpose() + k * r * k.transpose();
    let mut s = state.clone();
    s.mean = state.mean + k * y;
    s.covariance = symmetrize_checked(cov)?;
    s.time_since_update = 0;
    s.hits += 1;
    s.hit_streak += 1;
    Ok(s)
}
