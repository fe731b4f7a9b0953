//! Deterministic synthetic driving scenes: ego trajectory, parked and moving
//! vehicles, z-buffered depth, appearance channels and per-object labels.

mod config;
mod generate;
mod noise;
mod render;

pub use config::{CameraConfig, EgoConfig, LabelConfig, NoiseConfig, SceneConfig, TrafficConfig};
pub use generate::{camera_pose, generate_sequence, sequence_mount_height, FrameObservation, Sequence};
pub use noise::corrupt_depth;
pub use render::{
    label_objects, render, render_appearance, render_depth, Appearance, LabelParams, ObjectLabel, ObjectState,
    RenderOutput, NO_OWNER,
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for stream `stream` derived from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}
