//! Parsers for KITTI-style text files: tracking labels, calibration and
//! odometry poses. Errors carry 1-based line numbers.

use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4};

use crate::geometry::{CameraIntrinsics, RigidTransform};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KittiClass {
    Car,
    Van,
    Truck,
    Pedestrian,
    PersonSitting,
    Cyclist,
    Tram,
    Misc,
    DontCare,
}

impl FromStr for KittiClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "Car" => Self::Car,
            "Van" => Self::Van,
            "Truck" => Self::Truck,
            "Pedestrian" => Self::Pedestrian,
            "Person_sitting" => Self::PersonSitting,
            "Cyclist" => Self::Cyclist,
            "Tram" => Self::Tram,
            "Misc" => Self::Misc,
            "DontCare" => Self::DontCare,
            other => return Err(format!("unknown object type '{other}'")),
        })
    }
}

/// One row of a KITTI tracking label file.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabel {
    pub frame: usize,
    /// -1 for DontCare regions.
    pub track_id: i64,
    pub class: KittiClass,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    /// Left, top, right, bottom in pixels.
    pub bbox: [f64; 4],
    /// Height, width, length in meters.
    pub dimensions: [f64; 3],
    /// Bottom-center of the box in camera coordinates.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

fn number<T: FromStr>(tok: &str, what: &str, line: usize) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::Parse { line, reason: format!("{what}: '{tok}' is not a valid number") })
}

fn finite(v: f64, what: &str, line: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse { line, reason: format!("{what} is not finite") })
    }
}

/// Parses a tracking label file (17 columns, optional 18th score column).
/// Blank lines are skipped.
pub fn parse_kitti_labels(text: &str) -> Result<Vec<KittiLabel>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t: Vec<&str> = raw.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        if t.len() != 17 && t.len() != 18 {
            return Err(Error::Parse { line, reason: format!("expected 17 or 18 columns, found {}", t.len()) });
        }
        let f = |k: usize, what: &str| -> Result<f64> { finite(number::<f64>(t[k], what, line)?, what, line) };
        let class = t[2].parse::<KittiClass>().map_err(|reason| Error::Parse { line, reason })?;
        let bbox = [f(6, "left")?, f(7, "top")?, f(8, "right")?, f(9, "bottom")?];
        if bbox[2] < bbox[0] || bbox[3] < bbox[1] {
            return Err(Error::Parse { line, reason: "bounding box corners are inverted".into() });
        }
        out.push(KittiLabel {
            frame: number(t[0], "frame", line)?,
            track_id: number(t[1], "track id", line)?,
            class,
            truncated: f(3, "truncated")?,
            occluded: number(t[4], "occluded", line)?,
            alpha: f(5, "alpha")?,
            bbox,
            dimensions: [f(10, "height")?, f(11, "width")?, f(12, "length")?],
            location: [f(13, "x")?, f(14, "y")?, f(15, "z")?],
            rotation_y: f(16, "rotation_y")?,
            score: if t.len() == 18 { Some(f(17, "score")?) } else { None },
        });
    }
    Ok(out)
}

/// Reads the `P2` projection matrix of a calibration file into intrinsics.
/// Image size is not stored in KITTI calibration and must be supplied.
pub fn parse_kitti_calib(text: &str, width: usize, height: usize) -> Result<CameraIntrinsics> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let Some((key, rest)) = raw.split_once(':').or_else(|| raw.split_once(' ')) else {
            continue;
        };
        if key.trim() != "P2" {
            continue;
        }
        let v: Vec<f64> = rest
            .split_whitespace()
            .map(|tok| number::<f64>(tok, "P2", line).and_then(|x| finite(x, "P2", line)))
            .collect::<Result<_>>()?;
        if v.len() != 12 {
            return Err(Error::Parse { line, reason: format!("P2 needs 12 values, found {}", v.len()) });
        }
        return CameraIntrinsics::new(v[0], v[5], v[2], v[6], width, height)
            .map_err(|e| Error::Parse { line, reason: e.to_string() });
    }
    Err(Error::Format("calibration has no P2 entry".into()))
}

/// Largest rotation-block deviation from orthonormality accepted from a
/// text pose before it is re-projected onto SO(3). KITTI stores poses with
/// about six significant digits.
pub const POSE_REPAIR_TOLERANCE: f64 = 1e-4;

/// Nearest rotation in the Frobenius sense (polar factor of the SVD).
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Parses an odometry pose file: one row-major 3x4 camera-to-world matrix
/// per line.
pub fn parse_kitti_poses(text: &str) -> Result<Vec<RigidTransform>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = raw
            .split_whitespace()
            .map(|tok| number::<f64>(tok, "pose", line).and_then(|x| finite(x, "pose", line)))
            .collect::<Result<_>>()?;
        if v.len() != 12 {
            return Err(Error::Parse { line, reason: format!("pose needs 12 values, found {}", v.len()) });
        }
        let mut m = Matrix4::identity();
        for r in 0..3 {
            for c in 0..4 {
                m[(r, c)] = v[4 * r + c];
            }
        }
        let rot: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let dev = (rot.transpose() * rot - Matrix3::identity()).amax();
        if dev > POSE_REPAIR_TOLERANCE || rot.determinant() <= 0.0 {
            return Err(Error::Parse { line, reason: format!("rotation block is not a rotation (deviation {dev:e})") });
        }
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&nearest_rotation(&rot));
        out.push(RigidTransform::from_matrix(m).map_err(|e| Error::Parse { line, reason: e.to_string() })?);
    }
    Ok(out)
}
