use nalgebra::DVector;

use super::appearance::{appearance_backward, appearance_forward, pool_appearance};
use super::fusion::{pr_backward, pr_forward, tracklet_backward, tracklet_forward, MlpCache, TrackletCache};
use super::model::{FusionModel, HeadKind};
use super::point::{point_backward, point_forward, resample_patch, PatchInput, PointCache};
use crate::geometry::{compensate_ego_motion, BBox2D, PseudoLiDARPatch, RigidTransform};
use crate::scenesim::Appearance;
use crate::{Error, Result};

/// Encoder inputs for one object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub patch: PatchInput,
    /// Pooled appearance grid plus box geometry.
    pub appearance: Vec<f64>,
}

/// One training or evaluation example: the object's frames oldest first,
/// current frame last (`None` where the tracklet has no observation).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSample {
    pub frames: Vec<Option<FrameInput>>,
    /// Ground-truth depth in meters.
    pub target: f64,
}

impl DepthSample {
    pub fn current(&self) -> Option<&FrameInput> {
        self.frames.last().and_then(|f| f.as_ref())
    }
}

pub(crate) struct Trace {
    head: HeadKind,
    points: Vec<(usize, Option<PointCache>)>,
    apps: Vec<(usize, MlpCache)>,
    tracklet: Option<TrackletCache>,
    pr: Option<MlpCache>,
    head_in: DVector<f64>,
}

/// The last `window + 1` frames of a sample, left-padded with `None`.
fn window_slots(sample: &DepthSample, window: usize) -> Vec<Option<&FrameInput>> {
    let k = window + 1;
    let frames = &sample.frames[sample.frames.len().saturating_sub(k)..];
    let mut slots: Vec<Option<&FrameInput>> = vec![None; k - frames.len()];
    slots.extend(frames.iter().map(|f| f.as_ref()));
    slots
}

/// Forward pass returning the head output (log-depth) and a trace for
/// backpropagation.
pub(crate) fn forward_sample(model: &FusionModel, head: HeadKind, sample: &DepthSample) -> Result<(f64, Trace)> {
    let cur = sample
        .current()
        .ok_or_else(|| Error::InvalidInput("sample has no current-frame observation".into()))?;
    let app_len = model.config().appearance_input_len();
    let mut trace = Trace {
        head,
        points: Vec::new(),
        apps: Vec::new(),
        tracklet: None,
        pr: None,
        head_in: DVector::zeros(0),
    };
    let window = model.config().window;
    let check_app = |f: &FrameInput| -> Result<()> {
        if head.uses_appearance() && f.appearance.len() != app_len {
            return Err(Error::DimensionMismatch(format!(
                "appearance input has {} values, expected {app_len}",
                f.appearance.len()
            )));
        }
        Ok(())
    };
    check_app(cur)?;

    let temporal = |trace: &mut Trace, use_points: bool| -> Result<DVector<f64>> {
        let slots = window_slots(sample, window);
        let mut feats = Vec::with_capacity(slots.len());
        for (s, f) in slots.iter().enumerate() {
            match f {
                None => feats.push(None),
                Some(f) => {
                    if use_points {
                        let (v, c) = point_forward(model, &f.patch);
                        trace.points.push((s, c));
                        feats.push(Some(v));
                    } else {
                        check_app(f)?;
                        let (v, c) = appearance_forward(model, &f.appearance);
                        trace.apps.push((s, c));
                        feats.push(Some(v));
                    }
                }
            }
        }
        let (out, c) = tracklet_forward(model, &feats);
        trace.tracklet = Some(c);
        Ok(out)
    };

    let last = window;
    let feat = match head {
        HeadKind::Pl => {
            let (v, c) = point_forward(model, &cur.patch);
            trace.points.push((last, c));
            v
        }
        HeadKind::Rgb => {
            let (v, c) = appearance_forward(model, &cur.appearance);
            trace.apps.push((last, c));
            v
        }
        HeadKind::Pr => {
            let (pl, pc) = point_forward(model, &cur.patch);
            let (r, ac) = appearance_forward(model, &cur.appearance);
            trace.points.push((last, pc));
            trace.apps.push((last, ac));
            let (v, c) = pr_forward(model, &pl, &r);
            trace.pr = Some(c);
            v
        }
        HeadKind::T => temporal(&mut trace, true)?,
        HeadKind::RgbTemporal => temporal(&mut trace, false)?,
        HeadKind::Prt => {
            let tf = temporal(&mut trace, true)?;
            let (r, ac) = appearance_forward(model, &cur.appearance);
            trace.apps.push((last, ac));
            let (v, c) = pr_forward(model, &tf, &r);
            trace.pr = Some(c);
            v
        }
    };
    let out = model.layers.head.forward(model.params(), &feat)[0];
    trace.head_in = feat;
    Ok((out, trace))
}

/// Accumulates `dout * d(head output)/d(params)` into `grad`.
pub(crate) fn backward_sample(model: &FusionModel, trace: &Trace, dout: f64, grad: &mut [f64]) {
    let p = model.params();
    let dfeat = model.layers.head.backward(p, grad, trace.head_in.as_slice(), &[dout]);
    let window = model.config().window;

    let point_at = |s: usize| trace.points.iter().find(|(i, _)| *i == s).map(|(_, c)| c.as_ref());
    let app_at = |s: usize| trace.apps.iter().find(|(i, _)| *i == s).map(|(_, c)| c);

    let temporal_back = |d: &DVector<f64>, grad: &mut [f64], use_points: bool| {
        let dslots = tracklet_backward(model, trace.tracklet.as_ref().expect("temporal trace"), d, grad);
        let offset = window + 1 - dslots.len();
        for (k, ds) in dslots.iter().enumerate() {
            let s = k + offset;
            if use_points {
                if let Some(c) = point_at(s) {
                    point_backward(model, c, ds, grad);
                }
            } else if let Some(c) = app_at(s) {
                appearance_backward(model, c, ds, grad);
            }
        }
    };

    match trace.head {
        HeadKind::Pl => point_backward(model, point_at(window).flatten(), &dfeat, grad),
        HeadKind::Rgb => appearance_backward(model, app_at(window).expect("appearance trace"), &dfeat, grad),
        HeadKind::Pr => {
            let (dpl, dr) = pr_backward(model, trace.pr.as_ref().expect("pr trace"), &dfeat, grad);
            point_backward(model, point_at(window).flatten(), &dpl, grad);
            appearance_backward(model, app_at(window).expect("appearance trace"), &dr, grad);
        }
        HeadKind::T => temporal_back(&dfeat, grad, true),
        HeadKind::RgbTemporal => temporal_back(&dfeat, grad, false),
        HeadKind::Prt => {
            let (dtf, dr) = pr_backward(model, trace.pr.as_ref().expect("pr trace"), &dfeat, grad);
            temporal_back(&dtf, grad, true);
            appearance_backward(model, app_at(window).expect("appearance trace"), &dr, grad);
        }
    }
}

/// Predicted depth in meters for one sample.
pub fn predict_sample(model: &FusionModel, head: HeadKind, sample: &DepthSample) -> Result<f64> {
    Ok(forward_sample(model, head, sample)?.0.exp())
}

/// Log-depth head output for one sample.
pub fn head_output(model: &FusionModel, head: HeadKind, sample: &DepthSample) -> Result<f64> {
    Ok(forward_sample(model, head, sample)?.0)
}

/// Builds the frame inputs for one object observation. `patch` must already
/// be in the frame whose geometry the model should see.
pub fn frame_input(
    patch: &PseudoLiDARPatch,
    appearance: &Appearance,
    bbox: &BBox2D,
    model_config: &super::ModelConfig,
) -> Result<FrameInput> {
    Ok(FrameInput {
        patch: resample_patch(patch, model_config),
        appearance: pool_appearance(appearance, bbox, model_config)?,
    })
}

/// One observation in a PRT window: the patch cropped in its own frame and
/// that frame's camera pose.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFrame {
    pub patch: PseudoLiDARPatch,
    pub pose: RigidTransform,
}

/// Full PRT pipeline: compensate every patch into the current frame, encode,
/// fuse over time, fuse with the current appearance, regress depth.
/// `window` is oldest first with the current frame last.
pub fn forward_prt(
    window: &[Option<WindowFrame>],
    appearance: &Appearance,
    bbox: &BBox2D,
    model: &FusionModel,
) -> Result<f64> {
    let c = model.config();
    if window.len() > c.window + 1 {
        return Err(Error::InvalidInput(format!("window of {} frames exceeds {}", window.len(), c.window + 1)));
    }
    let current = window
        .last()
        .and_then(|f| f.as_ref())
        .ok_or_else(|| Error::InvalidInput("current frame missing from window".into()))?;
    let app = pool_appearance(appearance, bbox, c)?;
    let mut frames = Vec::with_capacity(window.len());
    for f in window {
        frames.push(match f {
            None => None,
            Some(f) => {
                let p = compensate_ego_motion(&f.patch, &current.pose, &f.pose)?;
                Some(FrameInput { patch: resample_patch(&p, c), appearance: app.clone() })
            }
        });
    }
    predict_sample(model, HeadKind::Prt, &DepthSample { frames, target: 1.0 })
}
