//! Headroom analysis: simulate a 3D detector by perturbing ground truth,
//! then swap one attribute at a time back to ground truth and measure how
//! much detection AP and tracking MOTA recover.

use std::fmt;
use std::str::FromStr;

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Box3D, CameraIntrinsics, RigidTransform};
use crate::io::{fmt_metric, format_table};
use crate::metrics::{average_precision, iou_3d, iou_bev, mot_metrics, DetectionRecord, GroundTruthBox, MotOutcome, TrackedBox};
use crate::scenesim::{derive_seed, ObjectLabel, Sequence};
use crate::tracking::{track_sequence_3d, Tracker3DParams};
use crate::{par, Error, Result};

/// IoU thresholds reported for AP.
pub const AP_THRESHOLDS: [f64; 3] = [0.5, 0.6, 0.7];

/// Center-distance gate (meters) for matching tracks to ground truth.
pub const MOT_MATCH_DISTANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttributeTag {
    Rotation,
    Size,
    Depth,
    Center2d,
    All,
}

impl AttributeTag {
    /// The single-attribute tags, in report order.
    pub const SINGLE: [AttributeTag; 4] = [Self::Rotation, Self::Size, Self::Depth, Self::Center2d];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rotation => "rotation",
            Self::Size => "size",
            Self::Depth => "depth",
            Self::Center2d => "center2d",
            Self::All => "all",
        }
    }
}

impl FromStr for AttributeTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Self::Rotation, Self::Size, Self::Depth, Self::Center2d, Self::All]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown attribute tag '{s}' (expected rotation, size, depth, center2d, all)")))
    }
}

impl fmt::Display for AttributeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Standard deviations of the simulated detector's errors.
/// The defaults put baseline AP@0.7 (3D) near 0.08 on the benchmark test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationProfile {
    /// Yaw error, radians.
    pub rotation_std: f64,
    /// Relative error of each box dimension.
    pub size_rel_std: f64,
    /// Relative depth error.
    pub depth_rel_std: f64,
    /// Projected-center error per axis, pixels.
    pub center_px_std: f64,
    pub seed: u64,
}

impl Default for PerturbationProfile {
    fn default() -> Self {
        Self { rotation_std: 0.05, size_rel_std: 0.03, depth_rel_std: 0.06, center_px_std: 1.0, seed: 0 }
    }
}

impl PerturbationProfile {
    /// Profile whose depth error matches a depth estimator with the given
    /// mean relative error (half-normal mean = std * sqrt(2 / pi)).
    pub fn with_depth_abs_rel(mut self, abs_rel: f64) -> Self {
        self.depth_rel_std = abs_rel * (std::f64::consts::FRAC_PI_2).sqrt();
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rotation_std", self.rotation_std),
            ("size_rel_std", self.size_rel_std),
            ("depth_rel_std", self.depth_rel_std),
            ("center_px_std", self.center_px_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        if self.size_rel_std >= 0.5 || self.depth_rel_std >= 0.5 {
            return Err(Error::config("depth_rel_std", "relative errors must stay below 0.5"));
        }
        Ok(())
    }
}

/// Monocular 3D box parameterization: projected center, depth, yaw, size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    /// World-frame yaw.
    pub yaw: f64,
    pub size: [f64; 3],
}

impl DetectionParams {
    pub fn from_label(label: &ObjectLabel, cam: &CameraIntrinsics) -> Self {
        let [x, y, z] = label.center_cam;
        Self {
            u: cam.fx * x / z + cam.cx,
            v: cam.fy * y / z + cam.cy,
            depth: z,
            yaw: label.box_world.yaw,
            size: label.box_world.size,
        }
    }

    /// World-frame box given the camera-to-world pose.
    pub fn to_box(&self, cam: &CameraIntrinsics, pose: &RigidTransform) -> Box3D {
        let c = cam.unproject(self.u, self.v, self.depth);
        let w = pose.apply(&Point3::from(c.coords));
        Box3D { center: [w.x, w.y, w.z], size: self.size, yaw: self.yaw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDetection {
    pub params: DetectionParams,
    pub score: f64,
    /// Index of the source label within its frame.
    pub label_index: usize,
}

/// Detections per frame of one sequence.
pub type SequenceDetections = Vec<Vec<SimDetection>>;

/// Confidence of a detection: decreases with its total normalized error
/// against ground truth. Recomputed whenever an attribute is replaced.
fn detection_score(p: &DetectionParams, gt: &DetectionParams, cam: &CameraIntrinsics) -> f64 {
    let err = (p.yaw - gt.yaw).abs()
        + (0..3).map(|i| (p.size[i] / gt.size[i] - 1.0).abs()).sum::<f64>() / 3.0
        + (p.depth / gt.depth - 1.0).abs()
        + ((p.u - gt.u).hypot(p.v - gt.v)) / cam.fx * 10.0;
    (-5.0 * err).exp()
}

/// Perturbs every labeled object once. The same standard-normal draws are
/// used whatever the profile, so profiles compare under paired noise.
/// Confidence decreases with the total normalized error.
pub fn simulate_detector(seq: &Sequence, profile: &PerturbationProfile) -> Result<SequenceDetections> {
    profile.validate()?;
    let cam = &seq.intrinsics;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(profile.seed, seq.seed));
    let mut out = Vec::with_capacity(seq.frames.len());
    for frame in &seq.frames {
        let mut dets = Vec::with_capacity(frame.objects.len());
        for (k, label) in frame.objects.iter().enumerate() {
            let z: [f64; 7] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let gt = DetectionParams::from_label(label, cam);
            let mut p = gt;
            p.yaw += profile.rotation_std * z[0];
            for i in 0..3 {
                p.size[i] *= 1.0 + profile.size_rel_std * z[1 + i];
            }
            p.depth *= 1.0 + profile.depth_rel_std * z[4];
            p.u += profile.center_px_std * z[5];
            p.v += profile.center_px_std * z[6];
            if !(p.depth > 0.0) {
                return Err(Error::Numeric("perturbed depth is not positive".into()));
            }
            dets.push(SimDetection { params: p, score: detection_score(&p, &gt, cam), label_index: k });
        }
        out.push(dets);
    }
    Ok(out)
}

fn label_of<'a>(seq: &'a Sequence, frame: usize, d: &SimDetection) -> Result<&'a ObjectLabel> {
    seq.frames
        .get(frame)
        .and_then(|f| f.objects.get(d.label_index))
        .ok_or_else(|| Error::InvalidInput(format!("detection in frame {frame} refers to missing label {}", d.label_index)))
}

fn check_shape(seq: &Sequence, dets: &SequenceDetections) -> Result<()> {
    if dets.len() != seq.frames.len() {
        return Err(Error::DimensionMismatch(format!("{} detection frames for {} sequence frames", dets.len(), seq.frames.len())));
    }
    Ok(())
}

/// Replaces the tagged attribute of every detection with its ground truth.
/// Injecting depth keeps the projected center, moving the box along its ray.
pub fn inject_gt(seq: &Sequence, dets: &SequenceDetections, tag: AttributeTag) -> Result<SequenceDetections> {
    check_shape(seq, dets)?;
    let cam = &seq.intrinsics;
    let mut out = dets.clone();
    for (f, frame) in out.iter_mut().enumerate() {
        for d in frame.iter_mut() {
            let gt = DetectionParams::from_label(label_of(seq, f, d)?, cam);
            let p = &mut d.params;
            match tag {
                AttributeTag::Rotation => p.yaw = gt.yaw,
                AttributeTag::Size => p.size = gt.size,
                AttributeTag::Depth => p.depth = gt.depth,
                AttributeTag::Center2d => {
                    p.u = gt.u;
                    p.v = gt.v;
                }
                AttributeTag::All => *p = gt,
            }
            d.score = detection_score(&d.params, &gt, cam);
        }
    }
    Ok(out)
}

/// Replaces detection depths with estimates; `depth_of(frame, label)`
/// returns `None` to keep the detector's own depth.
pub fn substitute_depths<F>(seq: &Sequence, dets: &SequenceDetections, mut depth_of: F) -> Result<SequenceDetections>
where
    F: FnMut(usize, &ObjectLabel) -> Option<f64>,
{
    check_shape(seq, dets)?;
    let mut out = dets.clone();
    for (f, frame) in out.iter_mut().enumerate() {
        for d in frame.iter_mut() {
            let label = label_of(seq, f, d)?;
            if let Some(z) = depth_of(f, label) {
                if !(z.is_finite() && z > 0.0) {
                    return Err(Error::InvalidInput(format!("substituted depth {z} in frame {f} is not positive")));
                }
                d.params.depth = z;
                d.score = detection_score(&d.params, &DetectionParams::from_label(label, &seq.intrinsics), &seq.intrinsics);
            }
        }
    }
    Ok(out)
}

pub fn detection_boxes(seq: &Sequence, dets: &SequenceDetections) -> Result<Vec<Vec<Box3D>>> {
    check_shape(seq, dets)?;
    Ok(dets
        .iter()
        .zip(&seq.frames)
        .map(|(ds, fr)| ds.iter().map(|d| d.params.to_box(&seq.intrinsics, &fr.ego_pose)).collect())
        .collect())
}

/// Detection and tracking quality of one detector variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadroomMetrics {
    /// AP at each of [`AP_THRESHOLDS`] with 3D IoU.
    pub ap_3d: [f64; 3],
    /// AP at each of [`AP_THRESHOLDS`] with bird's-eye-view IoU.
    pub ap_bev: [f64; 3],
    pub mota: f64,
    pub ids: usize,
}

struct SequenceEval {
    records: Vec<DetectionRecord>,
    gts: Vec<GroundTruthBox>,
    /// fp, fn, ids, ground-truth count.
    mot: [usize; 4],
}

fn evaluate_sequence(seq: &Sequence, dets: &SequenceDetections, tracker: &Tracker3DParams) -> Result<SequenceEval> {
    let boxes = detection_boxes(seq, dets)?;
    let mut records = Vec::new();
    let mut gts = Vec::new();
    for (f, (bs, ds)) in boxes.iter().zip(dets).enumerate() {
        for (b, det) in bs.iter().zip(ds) {
            records.push(DetectionRecord { frame_index: f, bbox3d: *b, score: det.score });
        }
        for l in &seq.frames[f].objects {
            gts.push(GroundTruthBox { frame_index: f, bbox3d: l.box_world });
        }
    }
    let tracked = track_sequence_3d(&boxes, tracker)?;
    let gt_tracks: Vec<Vec<TrackedBox>> = seq
        .frames
        .iter()
        .map(|fr| fr.objects.iter().map(|l| TrackedBox { id: l.id as u64, bbox3d: l.box_world }).collect())
        .collect();
    let mot = match mot_metrics(&tracked, &gt_tracks, MOT_MATCH_DISTANCE)? {
        MotOutcome::Report(r) => [r.fp, r.fn_, r.ids, r.gt_count],
        MotOutcome::NoGroundTruth { fp } => [fp, 0, 0, 0],
    };
    Ok(SequenceEval { records, gts, mot })
}

/// AP over all sequences pooled, CLEAR-MOT summed over sequences.
pub fn evaluate_detections(seqs: &[Sequence], dets: &[SequenceDetections], tracker: &Tracker3DParams) -> Result<HeadroomMetrics> {
    if seqs.len() != dets.len() {
        return Err(Error::DimensionMismatch(format!("{} detection sets for {} sequences", dets.len(), seqs.len())));
    }
    let per_seq = par::map_range(seqs.len(), |i| evaluate_sequence(&seqs[i], &dets[i], tracker));
    let mut records = Vec::new();
    let mut gts = Vec::new();
    let mut mot = [0usize; 4];
    let mut frame_base = 0;
    for (seq, r) in seqs.iter().zip(per_seq) {
        let r = r?;
        records.extend(r.records.into_iter().map(|d| DetectionRecord { frame_index: d.frame_index + frame_base, ..d }));
        gts.extend(r.gts.into_iter().map(|g| GroundTruthBox { frame_index: g.frame_index + frame_base, ..g }));
        for k in 0..4 {
            mot[k] += r.mot[k];
        }
        frame_base += seq.frames.len();
    }
    let [fp, fn_, ids, gt_count] = mot;
    if gt_count == 0 {
        return Err(Error::InvalidInput("no ground-truth objects to evaluate against".into()));
    }
    let ap = |iou: fn(&Box3D, &Box3D) -> f64| AP_THRESHOLDS.map(|t| average_precision(&records, &gts, iou, t));
    Ok(HeadroomMetrics {
        ap_3d: ap(iou_3d),
        ap_bev: ap(iou_bev),
        mota: 1.0 - (fp + fn_ + ids) as f64 / gt_count as f64,
        ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadroomRow {
    /// `baseline` or `+gt <attribute>`.
    pub label: String,
    pub metrics: HeadroomMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadroomReport {
    pub rows: Vec<HeadroomRow>,
}

impl HeadroomReport {
    pub fn baseline(&self) -> &HeadroomMetrics {
        &self.rows[0].metrics
    }

    pub fn row(&self, tag: AttributeTag) -> Option<&HeadroomMetrics> {
        let label = format!("+gt {}", tag.name());
        self.rows.iter().find(|r| r.label == label).map(|r| &r.metrics)
    }

    /// The single attribute whose injection gains the most, by AP@0.7 (3D)
    /// gain and then by MOTA gain. Ties go to the earlier tag.
    pub fn dominant_attribute(&self) -> (AttributeTag, AttributeTag) {
        let base = self.baseline();
        let pick = |key: &dyn Fn(&HeadroomMetrics) -> f64| {
            let mut best = (AttributeTag::SINGLE[0], f64::NEG_INFINITY);
            for t in AttributeTag::SINGLE {
                if let Some(m) = self.row(t) {
                    let g = key(m) - key(base);
                    if g > best.1 {
                        best = (t, g);
                    }
                }
            }
            best.0
        };
        (pick(&|m| m.ap_3d[2]), pick(&|m| m.mota))
    }

    /// Text table with absolute values and gains over the baseline.
    pub fn render(&self) -> String {
        let base = *self.baseline();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                let mut cells = vec![r.label.clone()];
                for i in 0..3 {
                    cells.push(fmt_metric(m.ap_3d[i], 3));
                }
                for i in 0..3 {
                    cells.push(fmt_metric(m.ap_bev[i], 3));
                }
                cells.push(fmt_metric(m.mota, 3));
                cells.push(m.ids.to_string());
                cells.push(format!("{:+.3}", m.ap_3d[2] - base.ap_3d[2]));
                cells.push(format!("{:+.3}", m.mota - base.mota));
                cells
            })
            .collect();
        format_table(
            &["variant", "3d@0.5", "3d@0.6", "3d@0.7", "bev@0.5", "bev@0.6", "bev@0.7", "mota", "ids", "d3d@0.7", "dmota"],
            &rows,
        )
    }
}

/// Evaluates the baseline detections and each single-attribute and
/// all-attribute ground-truth injection.
pub fn headroom_report(seqs: &[Sequence], baseline: &[SequenceDetections], tracker: &Tracker3DParams) -> Result<HeadroomReport> {
    let mut rows = vec![HeadroomRow { label: "baseline".into(), metrics: evaluate_detections(seqs, baseline, tracker)? }];
    for tag in AttributeTag::SINGLE.into_iter().chain([AttributeTag::All]) {
        let injected: Vec<SequenceDetections> =
            seqs.iter().zip(baseline).map(|(s, d)| inject_gt(s, d, tag)).collect::<Result<_>>()?;
        rows.push(HeadroomRow { label: format!("+gt {}", tag.name()), metrics: evaluate_detections(seqs, &injected, tracker)? });
    }
    Ok(HeadroomReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenesim::{generate_sequence, SceneConfig};

    fn seqs(n: u64) -> Vec<Sequence> {
        let mut c = SceneConfig::default();
        c.frames = 6;
        (0..n).map(|s| generate_sequence(&c, 40 + s).unwrap()).collect()
    }

    fn only(depth: f64) -> PerturbationProfile {
        PerturbationProfile { rotation_std: 0.0, size_rel_std: 0.0, depth_rel_std: depth, center_px_std: 0.0, seed: 3 }
    }

    fn assert_box_close(a: &Box3D, b: &Box3D) {
        for k in 0..3 {
            assert!((a.center[k] - b.center[k]).abs() < 1e-9, "{a:?} vs {b:?}");
            assert!((a.size[k] - b.size[k]).abs() < 1e-12);
        }
        assert!((a.yaw - b.yaw).abs() < 1e-12);
    }

    #[test]
    fn zero_profile_reproduces_ground_truth() {
        let s = &seqs(1)[0];
        let d = simulate_detector(s, &only(0.0)).unwrap();
        let boxes = detection_boxes(s, &d).unwrap();
        for (f, bs) in boxes.iter().enumerate() {
            assert_eq!(bs.len(), s.frames[f].objects.len());
            for (b, l) in bs.iter().zip(&s.frames[f].objects) {
                assert_box_close(b, &l.box_world);
            }
        }
        assert!(d.iter().flatten().all(|x| x.score == 1.0));
    }

    #[test]
    fn depth_injection_restores_depth_only_perturbation() {
        let s = &seqs(1)[0];
        let d = simulate_detector(s, &only(0.2)).unwrap();
        let fixed = inject_gt(s, &d, AttributeTag::Depth).unwrap();
        let boxes = detection_boxes(s, &fixed).unwrap();
        for (f, bs) in boxes.iter().enumerate() {
            for (b, l) in bs.iter().zip(&s.frames[f].objects) {
                assert_box_close(b, &l.box_world);
            }
        }
    }

    #[test]
    fn depth_injection_keeps_projection() {
        let s = &seqs(1)[0];
        let d = simulate_detector(s, &PerturbationProfile::default()).unwrap();
        let fixed = inject_gt(s, &d, AttributeTag::Depth).unwrap();
        for (a, b) in d.iter().flatten().zip(fixed.iter().flatten()) {
            assert_eq!((a.params.u, a.params.v, a.params.yaw, a.params.size), (b.params.u, b.params.v, b.params.yaw, b.params.size));
        }
    }

    #[test]
    fn injecting_everything_is_perfect() {
        let s = seqs(2);
        let d: Vec<_> = s.iter().map(|q| simulate_detector(q, &PerturbationProfile::default()).unwrap()).collect();
        let all: Vec<_> = s.iter().zip(&d).map(|(q, x)| inject_gt(q, x, AttributeTag::All).unwrap()).collect();
        let m = evaluate_detections(&s, &all, &Tracker3DParams::default()).unwrap();
        assert_eq!(m.ap_3d, [1.0; 3]);
        assert_eq!(m.ap_bev, [1.0; 3]);
        assert_eq!(m.mota, 1.0);
        assert_eq!(m.ids, 0);
    }

    #[test]
    fn unknown_tag_rejected() {
        assert!("depth".parse::<AttributeTag>().is_ok());
        assert!(matches!("velocity".parse::<AttributeTag>(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn paired_draws_across_profiles() {
        let s = &seqs(1)[0];
        let a = simulate_detector(s, &only(0.1)).unwrap();
        let b = simulate_detector(s, &only(0.2)).unwrap();
        for (f, (fa, fb)) in a.iter().zip(&b).enumerate() {
            for (x, y) in fa.iter().zip(fb) {
                let z = s.frames[f].objects[x.label_index].gt_depth;
                let (ea, eb) = (x.params.depth / z - 1.0, y.params.depth / z - 1.0);
                assert!((eb - 2.0 * ea).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn substitution_validates_depths() {
        let s = &seqs(1)[0];
        let d = simulate_detector(s, &only(0.1)).unwrap();
        let sub = substitute_depths(s, &d, |_, l| Some(l.gt_depth)).unwrap();
        let fixed = inject_gt(s, &d, AttributeTag::Depth).unwrap();
        assert_eq!(sub, fixed);
        assert!(substitute_depths(s, &d, |_, _| Some(-1.0)).is_err());
    }

    #[test]
    fn injection_is_idempotent() {
        let s = &seqs(1)[0];
        let d = simulate_detector(s, &PerturbationProfile::default()).unwrap();
        for tag in AttributeTag::SINGLE.into_iter().chain([AttributeTag::All]) {
            let once = inject_gt(s, &d, tag).unwrap();
            assert_eq!(inject_gt(s, &once, tag).unwrap(), once);
        }
    }

    #[test]
    fn depth_injection_preserves_projected_center() {
        let s = &seqs(1)[0];
        let d = simulate_detector(s, &PerturbationProfile::default()).unwrap();
        let fixed = inject_gt(s, &d, AttributeTag::Depth).unwrap();
        let boxes = detection_boxes(s, &fixed).unwrap();
        for (f, (bs, ds)) in boxes.iter().zip(&fixed).enumerate() {
            let inv = s.frames[f].ego_pose.inverse();
            for (b, det) in bs.iter().zip(ds) {
                let c = inv.apply(&Point3::from(b.center));
                let (u, v, _) = s.intrinsics.project(&c).unwrap();
                assert!((u - det.params.u).abs() < 1e-6 && (v - det.params.v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn depth_error_matches_half_normal_mean() {
        let mut c = SceneConfig::default();
        c.frames = 12;
        let mut errs = Vec::new();
        let mut k = 0;
        while errs.len() < 10_000 {
            let s = generate_sequence(&c, 900 + k).unwrap();
            k += 1;
            let d = simulate_detector(&s, &only(0.1)).unwrap();
            for (f, ds) in d.iter().enumerate() {
                for det in ds {
                    let z = s.frames[f].objects[det.label_index].gt_depth;
                    errs.push((det.params.depth - z).abs() / z);
                }
            }
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let expected = 0.1 * (2.0 / std::f64::consts::PI).sqrt();
        // Standard error of the mean is about 0.1 * 0.6 / 100.
        assert!((mean - expected).abs() < 0.003, "{mean} vs {expected}");
    }

    #[test]
    fn rotation_injection_is_noop_when_rotation_exact() {
        let s = seqs(2);
        let d: Vec<_> = s.iter().map(|q| simulate_detector(q, &only(0.1)).unwrap()).collect();
        let r: Vec<_> = s.iter().zip(&d).map(|(q, x)| inject_gt(q, x, AttributeTag::Rotation).unwrap()).collect();
        let p = Tracker3DParams::default();
        assert_eq!(evaluate_detections(&s, &d, &p).unwrap(), evaluate_detections(&s, &r, &p).unwrap());
    }

    #[test]
    fn zero_profile_rows_identical() {
        let s = seqs(2);
        let d: Vec<_> = s.iter().map(|q| simulate_detector(q, &only(0.0)).unwrap()).collect();
        let rep = headroom_report(&s, &d, &Tracker3DParams::default()).unwrap();
        assert_eq!(rep.rows.len(), 6);
        for r in &rep.rows {
            assert_eq!(r.metrics, *rep.baseline());
        }
        let text = rep.render();
        assert!(text.contains("+gt depth") && text.contains("+0.000"));
    }

    #[test]
    fn report_is_deterministic() {
        let s = seqs(2);
        let run = || {
            let d: Vec<_> = s.iter().map(|q| simulate_detector(q, &PerturbationProfile::default()).unwrap()).collect();
            headroom_report(&s, &d, &Tracker3DParams::default()).unwrap().render()
        };
        assert_eq!(run(), run());
    }
}
