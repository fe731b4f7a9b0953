//! Per-object depth metrics, box overlap, detection AP and CLEAR-MOT.

mod ap;
mod depth;
mod iou;
mod mot;

pub use ap::{average_precision, DetectionRecord, GroundTruthBox};
pub use depth::{depth_metrics, depth_metrics_with, DepthMetrics, LogBase};
pub use iou::{convex_polygon_area, iou_2d, iou_3d, iou_bev, polygon_intersection};
pub use mot::{mot_metrics, MotOutcome, MotReport, TrackedBox};
