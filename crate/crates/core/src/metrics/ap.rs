use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

/// A scored 3D detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame_index: usize,
    pub bbox3d: Box3D,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub frame_index: usize,
    pub bbox3d: Box3D,
}

/// All-point interpolated average precision.
///
/// Detections are visited by descending score (ties keep input order); each
/// is matched to the unmatched ground-truth box of the same frame with the
/// highest overlap, provided that overlap reaches `iou_threshold`. AP is the
/// area under the monotone precision envelope.
pub fn average_precision<F>(dets: &[DetectionRecord], gts: &[GroundTruthBox], iou_fn: F, iou_threshold: f64) -> f64
where
    F: Fn(&Box3D, &Box3D) -> f64,
{
    if gts.is_empty() || dets.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));

    let mut used = vec![false; gts.len()];
    let mut tp = Vec::with_capacity(dets.len());
    for &i in &order {
        let d = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts.iter().enumerate() {
            if used[j] || g.frame_index != d.frame_index {
                continue;
            }
            let o = iou_fn(&d.bbox3d, &g.bbox3d);
            if o >= iou_threshold && best.is_none_or(|(_, b)| o > b) {
                best = Some((j, o));
            }
        }
        match best {
            Some((j, _)) => {
                used[j] = true;
                tp.push(true);
            }
            None => tp.push(false),
        }
    }

    let n_gt = gts.len() as f64;
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        if t {
            hits += 1;
        }
        recall.push(hits as f64 / n_gt);
        precision.push(hits as f64 / (k + 1) as f64);
    }
    // Monotone envelope from the right.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap
}
