use serde::{Deserialize, Serialize};

use super::forward::{DepthSample, FrameInput};
use super::model::ModelConfig;
use super::point::resample_patch;
use super::appearance::pool_appearance;
use crate::geometry::{compensate_ego_motion, crop_patch, BBox2D, PseudoLiDARPatch};
use crate::scenesim::Sequence;
use crate::tracking::{track_sequence_2d, SortParams};
use crate::{par, Error, Result};

/// How observations of the same object are linked across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssociationMode {
    /// Simulator object ids.
    Gt,
    /// SORT tracklets formed from the per-frame 2D boxes.
    Predicted,
}

impl std::str::FromStr for AssociationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" => Ok(Self::Gt),
            "predicted" => Ok(Self::Predicted),
            _ => Err(Error::InvalidInput(format!("unknown association '{s}' (expected gt or predicted)"))),
        }
    }
}

impl std::fmt::Display for AssociationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gt => "gt",
            Self::Predicted => "predicted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    /// Past frames attached to every sample.
    pub window: usize,
    pub association: AssociationMode,
    /// Transform past patches into the current camera frame.
    pub compensate_ego_motion: bool,
    /// Crop patches from the clean rendered depth instead of the noisy map.
    pub clean_depth: bool,
    pub sort: SortParams,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            window: 1,
            association: AssociationMode::Predicted,
            compensate_ego_motion: true,
            clean_depth: false,
            sort: SortParams::default(),
        }
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSource {
    pub sequence: usize,
    pub frame: usize,
    /// Index into the frame's object labels.
    pub object: usize,
    pub object_id: u32,
}

/// Samples with their provenance, in (sequence, frame, object) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepthDataset {
    pub samples: Vec<DepthSample>,
    pub sources: Vec<SampleSource>,
}

impl DepthDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }
}

/// Track link of every labeled object: `links[frame][object]`.
pub fn associate_sequence(seq: &Sequence, mode: AssociationMode, sort: &SortParams) -> Result<Vec<Vec<Option<u64>>>> {
    match mode {
        AssociationMode::Gt => Ok(seq
            .frames
            .iter()
            .map(|f| f.objects.iter().map(|o| Some(o.id as u64)).collect())
            .collect()),
        AssociationMode::Predicted => {
            let boxes: Vec<Vec<BBox2D>> = seq.frames.iter().map(|f| f.objects.iter().map(|o| o.bbox2d).collect()).collect();
            Ok(track_sequence_2d(&boxes, sort)?.assignments)
        }
    }
}

fn sequence_samples(
    seq_index: usize,
    seq: &Sequence,
    opts: &DatasetOptions,
    model: &ModelConfig,
) -> Result<Vec<(DepthSample, SampleSource)>> {
    let links = associate_sequence(seq, opts.association, &opts.sort)?;
    let cam = &seq.intrinsics;
    let patches: Vec<Vec<PseudoLiDARPatch>> = seq
        .frames
        .iter()
        .map(|f| {
            let depth = if opts.clean_depth { &f.depth_clean } else { &f.depth_noisy };
            f.objects.iter().map(|o| crop_patch(depth, cam, &o.bbox2d, f.frame_index)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let appearance: Vec<Vec<Vec<f64>>> = seq
        .frames
        .iter()
        .map(|f| f.objects.iter().map(|o| pool_appearance(&f.appearance, &o.bbox2d, model)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (t, frame) in seq.frames.iter().enumerate() {
        for (i, obj) in frame.objects.iter().enumerate() {
            let mut frames: Vec<Option<FrameInput>> = Vec::with_capacity(opts.window + 1);
            for j in (1..=opts.window).rev() {
                let past = t.checked_sub(j).and_then(|p| {
                    let link = links[t][i]?;
                    let k = links[p].iter().position(|l| *l == Some(link))?;
                    Some((p, k))
                });
                frames.push(match past {
                    None => None,
                    Some((p, k)) => {
                        let patch = if opts.compensate_ego_motion {
                            compensate_ego_motion(&patches[p][k], &frame.ego_pose, &seq.frames[p].ego_pose)?
                        } else {
                            patches[p][k].clone()
                        };
                        Some(FrameInput {
                            patch: resample_patch(&patch, model),
                            appearance: appearance[p][k].clone(),
                        })
                    }
                });
            }
            frames.push(Some(FrameInput {
                patch: resample_patch(&patches[t][i], model),
                appearance: appearance[t][i].clone(),
            }));
            out.push((
                DepthSample { frames, target: obj.gt_depth },
                SampleSource { sequence: seq_index, frame: t, object: i, object_id: obj.id },
            ));
        }
    }
    Ok(out)
}

/// Builds depth samples for every labeled object of every sequence.
pub fn build_dataset(sequences: &[Sequence], opts: &DatasetOptions, model: &ModelConfig) -> Result<DepthDataset> {
    let per_seq = par::map_range(sequences.len(), |s| sequence_samples(s, &sequences[s], opts, model));
    let mut ds = DepthDataset::default();
    for r in per_seq {
        for (sample, src) in r? {
            ds.samples.push(sample);
            ds.sources.push(src);
        }
    }
    Ok(ds)
}
