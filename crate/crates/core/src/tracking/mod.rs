//! Image-plane SORT tracking for tracklet formation and a 3D
//! constant-velocity tracker for tracking-by-detection.

mod assign;
mod kalman2d;
mod sort;
mod tracker3d;

pub use assign::min_cost_assignment;
pub use kalman2d::{
    innovation_nis, kalman_predict, kalman_update, measurement_noise, observation, process_noise, transition,
    KalmanParams2D, Mat7, Track2DState, Vec7, PSD_TOLERANCE,
};
pub use sort::{associate, track_sequence_2d, Association, SortParams, Tracklet, TrackletEntry, TrackingResult2D};
pub use tracker3d::{track_sequence_3d, Track3DState, TrackedBox, Tracker3DParams};
