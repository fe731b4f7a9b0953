//! `SequenceArchive`: a self-describing binary container for one simulated
//! sequence.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic        8 bytes  "PRTSEQ\0\0"
//! version      u32      = 1
//! manifest     u32 length + UTF-8 TOML (version, seed, frames, intrinsics, config)
//! manifest crc u32      CRC-32 of the manifest bytes
//! per frame:
//!   length     u64      payload bytes
//!   payload             frame index u32, pose 16 x f64 row-major,
//!                       clean depth grid, noisy depth grid (u32 w, u32 h, f32 values),
//!                       appearance (u32 w, u32 h, u32 channels, f32 values),
//!                       label and state text records (u32 length + UTF-8)
//!   crc        u32      CRC-32 of the payload
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bytes::{Reader, Writer};
use crate::geometry::{BBox2D, Box3D, CameraIntrinsics, DepthMap, RigidTransform};
use crate::scenesim::{Appearance, FrameObservation, ObjectLabel, ObjectState, SceneConfig, Sequence};
use crate::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"PRTSEQ\0\0";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    seed: u64,
    frames: usize,
    intrinsics: CameraIntrinsics,
    config: SceneConfig,
}

fn put_depth(w: &mut Writer, d: &DepthMap) {
    w.u32(d.width as u32);
    w.u32(d.height as u32);
    for &v in &d.values {
        w.f32(v);
    }
}

fn get_depth(r: &mut Reader) -> Result<DepthMap> {
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("depth grid size overflows".into()))?;
    let mut values = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        values.push(r.f32()?);
    }
    let d = DepthMap { width, height, values };
    d.validate()?;
    Ok(d)
}

/// One whitespace-separated record per line; reals use the shortest
/// representation that parses back to the same bits.
fn label_record(l: &ObjectLabel) -> String {
    let b = &l.bbox2d;
    let w = &l.box_world;
    format!(
        "label {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
        l.id,
        b.x1,
        b.y1,
        b.x2,
        b.y2,
        l.gt_depth,
        l.center_cam[0],
        l.center_cam[1],
        l.center_cam[2],
        w.center[0],
        w.center[1],
        w.center[2],
        w.size[0],
        w.size[1],
        w.size[2],
        w.yaw,
        l.visibility,
        l.visible_pixels
    )
}

fn state_record(s: &ObjectState) -> String {
    format!(
        "state {} {} {} {} {} {} {} {} {} {}",
        s.id, s.center[0], s.center[1], s.center[2], s.size[0], s.size[1], s.size[2], s.yaw, s.velocity[0], s.velocity[1]
    )
}

fn parse_fields(line: &str, tag: &str, count: usize, lineno: usize) -> Result<Vec<f64>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(Error::Parse { line: lineno, reason: format!("expected '{tag}' record") });
    }
    let vals: Vec<&str> = it.collect();
    if vals.len() != count {
        return Err(Error::Parse { line: lineno, reason: format!("expected {count} fields, found {}", vals.len()) });
    }
    vals.iter()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Parse { line: lineno, reason: format!("'{v}' is not a number") })
        })
        .collect()
}

fn parse_labels(text: &str) -> Result<Vec<ObjectLabel>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let f = parse_fields(line, "label", 18, i + 1)?;
            Ok(ObjectLabel {
                id: f[0] as u32,
                bbox2d: BBox2D { x1: f[1], y1: f[2], x2: f[3], y2: f[4] },
                gt_depth: f[5],
                center_cam: [f[6], f[7], f[8]],
                box_world: Box3D { center: [f[9], f[10], f[11]], size: [f[12], f[13], f[14]], yaw: f[15] },
                visibility: f[16],
                visible_pixels: f[17] as usize,
            })
        })
        .collect()
}

fn parse_states(text: &str) -> Result<Vec<ObjectState>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let f = parse_fields(line, "state", 10, i + 1)?;
            Ok(ObjectState {
                id: f[0] as u32,
                center: [f[1], f[2], f[3]],
                size: [f[4], f[5], f[6]],
                yaw: f[7],
                velocity: [f[8], f[9]],
            })
        })
        .collect()
}

fn join_lines(lines: impl Iterator<Item = String>) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

fn frame_payload(f: &FrameObservation) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(f.frame_index as u32);
    for v in f.ego_pose.to_row_major() {
        w.f64(v);
    }
    put_depth(&mut w, &f.depth_clean);
    put_depth(&mut w, &f.depth_noisy);
    w.u32(f.appearance.width as u32);
    w.u32(f.appearance.height as u32);
    w.u32(Appearance::CHANNELS as u32);
    for &v in &f.appearance.data {
        w.f32(v);
    }
    w.text(&join_lines(f.objects.iter().map(label_record)));
    w.text(&join_lines(f.states.iter().map(state_record)));
    w.buf
}

fn parse_frame(payload: &[u8]) -> Result<FrameObservation> {
    let mut r = Reader::new(payload, "frame payload");
    let frame_index = r.u32()? as usize;
    let mut m = [0.0; 16];
    for v in m.iter_mut() {
        *v = r.f64()?;
    }
    let ego_pose = RigidTransform::from_row_major(&m)?;
    let depth_clean = get_depth(&mut r)?;
    let depth_noisy = get_depth(&mut r)?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let channels = r.u32()? as usize;
    if channels != Appearance::CHANNELS {
        return Err(Error::Format(format!("appearance has {channels} channels, expected {}", Appearance::CHANNELS)));
    }
    let n = width * height * channels;
    let mut data = Vec::with_capacity(n.min(1 << 26));
    for _ in 0..n {
        data.push(r.f32()?);
    }
    let objects = parse_labels(&r.text()?)?;
    let states = parse_states(&r.text()?)?;
    if !r.is_done() {
        return Err(Error::Format("trailing bytes in frame payload".into()));
    }
    Ok(FrameObservation {
        frame_index,
        ego_pose,
        depth_clean,
        depth_noisy,
        appearance: Appearance { width, height, data },
        objects,
        states,
    })
}

/// Serializes a sequence to archive bytes.
pub fn encode_sequence(seq: &Sequence) -> Result<Vec<u8>> {
    let manifest = Manifest {
        version: ARCHIVE_VERSION,
        seed: seq.seed,
        frames: seq.frames.len(),
        intrinsics: seq.intrinsics,
        config: seq.config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let mut w = Writer::default();
    w.bytes(ARCHIVE_MAGIC);
    w.u32(ARCHIVE_VERSION);
    w.text(&text);
    w.u32(crc32fast::hash(text.as_bytes()));
    for f in &seq.frames {
        let p = frame_payload(f);
        w.u64(p.len() as u64);
        w.bytes(&p);
        w.u32(crc32fast::hash(&p));
    }
    Ok(w.buf)
}

/// Parses archive bytes, verifying magic, version and every checksum.
pub fn decode_sequence(data: &[u8]) -> Result<Sequence> {
    let mut r = Reader::new(data, "sequence archive");
    if r.take(8)? != ARCHIVE_MAGIC {
        return Err(Error::Format("not a sequence archive (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != ARCHIVE_VERSION {
        return Err(Error::Format(format!("unsupported archive version {version}")));
    }
    let text = r.text()?;
    if r.u32()? != crc32fast::hash(text.as_bytes()) {
        return Err(Error::Format("manifest checksum mismatch".into()));
    }
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if manifest.version != version {
        return Err(Error::Format("manifest version disagrees with header".into()));
    }
    let mut frames = Vec::with_capacity(manifest.frames.min(1 << 16));
    for k in 0..manifest.frames {
        let n = r.count(1)?;
        let payload = r.take(n)?;
        if r.u32()? != crc32fast::hash(payload) {
            return Err(Error::Checksum { frame: k });
        }
        frames.push(parse_frame(payload)?);
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes after last frame".into()));
    }
    Ok(Sequence { frames, intrinsics: manifest.intrinsics, seed: manifest.seed, config: manifest.config })
}

pub fn write_sequence(path: impl AsRef<Path>, seq: &Sequence) -> Result<()> {
    std::fs::write(path, encode_sequence(seq)?)?;
    Ok(())
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<Sequence> {
    decode_sequence(&std::fs::read(path)?)
}
