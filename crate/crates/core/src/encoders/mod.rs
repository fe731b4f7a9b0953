//! Learned per-object depth: a point-set encoder for pseudo-LiDAR patches,
//! an appearance encoder pooled over the object box, fusion of the two, fusion
//! over a tracklet window and a log-depth regression head, trained with
//! hand-written backpropagation.

mod appearance;
mod dataset;
mod forward;
mod fusion;
mod model;
mod nn;
mod point;
mod train;

pub use appearance::{encode_appearance, encode_appearance_input, pool_appearance};
pub use dataset::{associate_sequence, build_dataset, AssociationMode, DatasetOptions, DepthDataset, SampleSource};
pub use forward::{forward_prt, frame_input, head_output, predict_sample, DepthSample, FrameInput, WindowFrame};
pub use fusion::{fuse_pr, fuse_tracklet, predict_object_depth};
pub use model::{FeatureVector, FusionModel, HeadKind, ModelConfig, TensorSpec};
pub use nn::{ramp, ramp_grad};
pub use point::{encode_patch, encode_patch_input, resample_patch, PatchInput};
pub use train::{loss_and_gradients, predict_all, train, Adam, EpochStats, LossKind, TrainConfig};
