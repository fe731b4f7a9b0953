use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use crate::tracking::TrackedBox;
use crate::tracking::min_cost_assignment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub mota: f64,
    pub ids: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_count: usize,
    pub matches: usize,
    /// Mean center distance of matched pairs in meters (0 when none).
    pub motp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotOutcome {
    Report(MotReport),
    /// No ground-truth boxes in any frame; MOTA is undefined.
    NoGroundTruth { fp: usize },
}

impl MotOutcome {
    pub fn report(&self) -> Option<&MotReport> {
        match self {
            MotOutcome::Report(r) => Some(r),
            MotOutcome::NoGroundTruth { .. } => None,
        }
    }
}

fn center_distance(a: &TrackedBox, b: &TrackedBox) -> f64 {
    let (p, q) = (a.bbox3d.center, b.bbox3d.center);
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// CLEAR-MOT over aligned frames with a center-distance match gate.
pub fn mot_metrics(tracked: &[Vec<TrackedBox>], gt: &[Vec<TrackedBox>], match_distance: f64) -> Result<MotOutcome> {
    if tracked.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} tracked frames vs {} ground-truth frames",
            tracked.len(),
            gt.len()
        )));
    }
    if !(match_distance > 0.0) {
        return Err(Error::InvalidInput("match distance must be positive".into()));
    }
    // gt id -> track id of its previous frame's match, and of its last match ever.
    let mut prev: HashMap<u64, u64> = HashMap::new();
    let mut last: HashMap<u64, u64> = HashMap::new();
    let (mut fp, mut fn_, mut ids, mut gt_count, mut matches) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut dist_sum = 0.0;

    for (trk, gts) in tracked.iter().zip(gt) {
        gt_count += gts.len();
        let mut gt_match: Vec<Option<usize>> = vec![None; gts.len()];
        let mut trk_used = vec![false; trk.len()];

        for (g, gbox) in gts.iter().enumerate() {
            if let Some(&tid) = prev.get(&gbox.id) {
                if let Some(t) = trk.iter().position(|b| b.id == tid) {
                    if !trk_used[t] && center_distance(&trk[t], gbox) <= match_distance {
                        gt_match[g] = Some(t);
                        trk_used[t] = true;
                    }
                }
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&g| gt_match[g].is_none()).collect();
        let free_t: Vec<usize> = (0..trk.len()).filter(|&t| !trk_used[t]).collect();
        if !free_g.is_empty() && !free_t.is_empty() {
            let big = 1e6 * (1.0 + match_distance);
            let nt = free_t.len();
            let mut cost = vec![big; free_g.len() * nt];
            for (i, &g) in free_g.iter().enumerate() {
                for (j, &t) in free_t.iter().enumerate() {
                    let d = center_distance(&trk[t], &gts[g]);
                    if d <= match_distance {
                        cost[i * nt + j] = d;
                    }
                }
            }
            for (i, a) in min_cost_assignment(&cost, free_g.len(), nt).into_iter().enumerate() {
                if let Some(j) = a {
                    if cost[i * nt + j] <= match_distance {
                        gt_match[free_g[i]] = Some(free_t[j]);
                        trk_used[free_t[j]] = true;
                    }
                }
            }
        }

        prev.clear();
        for (g, m) in gt_match.iter().enumerate() {
            match m {
                Some(t) => {
                    let gid = gts[g].id;
                    let tid = trk[*t].id;
                    if let Some(&old) = last.get(&gid) {
                        if old != tid {
                            ids += 1;
                        }
                    }
                    last.insert(gid, tid);
                    prev.insert(gid, tid);
                    matches += 1;
                    dist_sum += center_distance(&trk[*t], &gts[g]);
                }
                None => fn_ += 1,
            }
        }
        fp += trk_used.iter().filter(|u| !**u).count();
    }

    if gt_count == 0 {
        return Ok(MotOutcome::NoGroundTruth { fp });
    }
    Ok(MotOutcome::Report(MotReport {
        mota: 1.0 - (fp + fn_ + ids) as f64 / gt_count as f64,
        ids,
        fp,
        fn_,
        gt_count,
        matches,
        motp: if matches > 0 { dist_sum / matches as f64 } else { 0.0 },
    }))
}
