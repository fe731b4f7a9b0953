//! Persistence: sequence archives, KITTI text formats, checkpoints, TOML
//! configuration and reports.

mod archive;
mod bytes;
mod checkpoint;
mod kitti;
mod report;

use std::path::Path;

use serde::de::DeserializeOwned;

pub use archive::{decode_sequence, encode_sequence, read_sequence, write_sequence, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use kitti::{parse_kitti_calib, parse_kitti_labels, parse_kitti_poses, KittiClass, KittiLabel, POSE_REPAIR_TOLERANCE};
pub use report::{fmt_metric, format_kv, format_table, parse_kv};

use crate::{Error, Result};

/// Parses TOML text, mapping syntax and schema errors to a line number.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
        Error::Parse { line, reason: e.message().to_string() }
    })
}

pub fn load_toml<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    parse_toml(&std::fs::read_to_string(path)?)
}
