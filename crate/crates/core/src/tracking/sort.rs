use serde::{Deserialize, Serialize};

use super::assign::min_cost_assignment;
use super::kalman2d::{kalman_predict, kalman_update, KalmanParams2D, Track2DState};
use crate::geometry::BBox2D;
use crate::metrics::iou_2d;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SortParams {
    pub iou_threshold: f64,
    pub min_hits: usize,
    pub max_age: usize,
    pub kalman: KalmanParams2D,
}

impl Default for SortParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            min_hits: 2,
            max_age: 3,
            kalman: KalmanParams2D::default(),
        }
    }
}

/// Result of matching predicted track boxes against detections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track index, detection index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Maximum-total-IoU assignment; pairs below `iou_threshold` are dropped.
pub fn associate(tracks: &[BBox2D], detections: &[BBox2D], iou_threshold: f64) -> Association {
    let (nt, nd) = (tracks.len(), detections.len());
    let mut cost = vec![0.0; nt * nd];
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            cost[i * nd + j] = -iou_2d(t, d);
        }
    }
    let assignment = min_cost_assignment(&cost, nt, nd);
    let mut out = Association::default();
    let mut det_used = vec![false; nd];
    for (i, a) in assignment.iter().enumerate() {
        match a {
            Some(j) if -cost[i * nd + j] >= iou_threshold && -cost[i * nd + j] > 0.0 => {
                out.matches.push((i, *j));
                det_used[*j] = true;
            }
            _ => out.unmatched_tracks.push(i),
        }
    }
    out.unmatched_detections = (0..nd).filter(|&j| !det_used[j]).collect();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackletEntry {
    pub frame_index: usize,
    pub bbox2d: BBox2D,
    /// Index of the detection within its frame's input list.
    pub detection_index: usize,
}

/// One object's detections linked across frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub id: u64,
    pub entries: Vec<TrackletEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackingResult2D {
    pub tracklets: Vec<Tracklet>,
    /// For every frame and detection, the id of the tracklet it joined.
    pub assignments: Vec<Vec<Option<u64>>>,
}

struct LiveTrack {
    state: Track2DState,
    confirmed: bool,
    entries: Vec<TrackletEntry>,
}

/// SORT over a sequence of per-frame detection boxes.
///
/// A track is confirmed once it has `min_hits` consecutive matches and is
/// dropped after more than `max_age` frames without one. Confirmed tracks are
/// reported with all their entries, including those before confirmation.
pub fn track_sequence_2d(frames: &[Vec<BBox2D>], params: &SortParams) -> Result<TrackingResult2D> {
    let mut live: Vec<LiveTrack> = Vec::new();
    let mut finished: Vec<LiveTrack> = Vec::new();
    let mut next_id = 1u64;

    for (f, dets) in frames.iter().enumerate() {
        for d in dets {
            d.validate()?;
        }
        for t in live.iter_mut() {
            t.state = kalman_predict(&t.state, &params.kalman);
        }
        let predicted: Vec<BBox2D> = live.iter().map(|t| t.state.bbox()).collect();
        let assoc = associate(&predicted, dets, params.iou_threshold);
        for &(ti, di) in &assoc.matches {
            let t = &mut live[ti];
            t.state = kalman_update(&t.state, &dets[di], &params.kalman)?;
            t.entries.push(TrackletEntry {
                frame_index: f,
                bbox2d: dets[di],
                detection_index: di,
            });
        }
        for &di in &assoc.unmatched_detections {
            live.push(LiveTrack {
                state: Track2DState::new(next_id, &dets[di], &params.kalman),
                confirmed: false,
                entries: vec![TrackletEntry {
                    frame_index: f,
                    bbox2d: dets[di],
                    detection_index: di,
                }],
            });
            next_id += 1;
        }
        for t in live.iter_mut() {
            if t.state.hit_streak >= params.min_hits {
                t.confirmed = true;
            }
        }
        let (keep, dead): (Vec<_>, Vec<_>) = live
            .into_iter()
            .partition(|t| t.state.time_since_update <= params.max_age);
        live = keep;
        finished.extend(dead);
    }
    finished.extend(live);

    let mut tracklets: Vec<Tracklet> = finished
        .into_iter()
        .filter(|t| t.confirmed)
        .map(|t| Tracklet {
            id: t.state.id,
            entries: t.entries,
        })
        .collect();
    tracklets.sort_by_key(|t| t.id);

    let mut assignments: Vec<Vec<Option<u64>>> = frames.iter().map(|d| vec![None; d.len()]).collect();
    for t in &tracklets {
        for e in &t.entries {
            assignments[e.frame_index][e.detection_index] = Some(t.id);
        }
    }
    Ok(TrackingResult2D { tracklets, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64) -> BBox2D {
        BBox2D::new(x, y, x + 20.0, y + 10.0).unwrap()
    }

    #[test]
    fn identical_lists_match_identity() {
        let boxes = vec![b(0.0, 0.0), b(50.0, 0.0), b(100.0, 0.0)];
        let a = associate(&boxes, &boxes, 0.3);
        assert_eq!(a.matches, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(a.unmatched_tracks.is_empty() && a.unmatched_detections.is_empty());
    }

    #[test]
    fn disjoint_all_unmatched() {
        let a = associate(&[b(0.0, 0.0)], &[b(100.0, 100.0), b(200.0, 0.0)], 0.0);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_tracks, vec![0]);
        assert_eq!(a.unmatched_detections, vec![0, 1]);
    }

    #[test]
    fn single_object_one_tracklet() {
        let frames: Vec<Vec<BBox2D>> = (0..10).map(|k| vec![b(10.0 + 2.0 * k as f64, 20.0)]).collect();
        let r = track_sequence_2d(&frames, &SortParams::default()).unwrap();
        assert_eq!(r.tracklets.len(), 1);
        assert_eq!(r.tracklets[0].entries.len(), 10);
        assert!(r.assignments.iter().all(|a| a[0] == Some(r.tracklets[0].id)));
    }

    #[test]
    fn long_gap_gives_new_id() {
        let p = SortParams::default();
        let mut frames: Vec<Vec<BBox2D>> = Vec::new();
        for _ in 0..4 {
            frames.push(vec![b(10.0, 20.0)]);
        }
        for _ in 0..(p.max_age + 2) {
            frames.push(vec![]);
        }
        for _ in 0..4 {
            frames.push(vec![b(10.0, 20.0)]);
        }
        let r = track_sequence_2d(&frames, &p).unwrap();
        assert_eq!(r.tracklets.len(), 2);
        assert_ne!(r.tracklets[0].id, r.tracklets[1].id);
    }

    #[test]
    fn short_gap_keeps_id() {
        let p = SortParams::default();
        let mut frames: Vec<Vec<BBox2D>> = vec![vec![b(10.0, 20.0)]; 4];
        frames.push(vec![]);
        frames.extend(vec![vec![b(10.0, 20.0)]; 3]);
        let r = track_sequence_2d(&frames, &p).unwrap();
        assert_eq!(r.tracklets.len(), 1);
        assert_eq!(r.tracklets[0].entries.len(), 7);
    }
}
