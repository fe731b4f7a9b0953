//! Per-object monocular depth estimation by multi-level fusion.
//!
//! The crate lifts dense depth maps into pseudo-LiDAR, crops per-object
//! patches, compensates ego motion across a tracklet window and regresses
//! the depth of each object's 3D center from point-set, appearance and
//! temporal features. Around that core sit a deterministic synthetic
//! driving-scene simulator, 2D/3D Kalman trackers, the depth / detection /
//! tracking metric suite and a harness that swaps individual predicted
//! attributes for ground truth to locate the perception bottleneck.
//!
//! Data-parallel loops (rendering, batch gradients, evaluation sweeps) go
//! through [`par`], which uses rayon when the `parallel` feature is enabled
//! and plain iterators otherwise. Results are identical either way.

pub mod benchmark;
pub mod encoders;
pub mod error;
pub mod geometry;
pub mod headroom;
pub mod io;
pub mod metrics;
pub mod par;
pub mod scenesim;
pub mod tracking;

pub use error::{Error, Result};
