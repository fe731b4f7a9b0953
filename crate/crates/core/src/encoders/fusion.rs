use nalgebra::DVector;

use super::model::{FeatureVector, FusionModel};
use super::nn::{concat, ramp_back, ramp_vec, Linear};
use crate::{Error, Result};

pub(crate) struct MlpCache {
    x: DVector<f64>,
    pre1: DVector<f64>,
    h: DVector<f64>,
    pre2: DVector<f64>,
}

/// `ramp(l2(ramp(l1(x))))`.
pub(crate) fn mlp_forward(p: &[f64], l1: Linear, l2: Linear, x: DVector<f64>) -> (DVector<f64>, MlpCache) {
    let pre1 = l1.forward(p, &x);
    let h = ramp_vec(&pre1);
    let pre2 = l2.forward(p, &h);
    let out = ramp_vec(&pre2);
    (out, MlpCache { x, pre1, h, pre2 })
}

pub(crate) fn mlp_backward(
    p: &[f64],
    l1: Linear,
    l2: Linear,
    cache: &MlpCache,
    dout: &DVector<f64>,
    grad: &mut [f64],
    need_input_grad: bool,
) -> Option<DVector<f64>> {
    let d2 = ramp_back(&cache.pre2, dout);
    let dh = l2.backward(p, grad, cache.h.as_slice(), d2.as_slice());
    let d1 = ramp_back(&cache.pre1, &dh);
    if need_input_grad {
        Some(l1.backward(p, grad, cache.x.as_slice(), d1.as_slice()))
    } else {
        l1.accumulate(grad, cache.x.as_slice(), d1.as_slice());
        None
    }
}

fn check_width(f: &FeatureVector, width: usize, what: &str) -> Result<()> {
    if f.len() != width {
        return Err(Error::DimensionMismatch(format!("{what} has {} values, model expects {width}", f.len())));
    }
    Ok(())
}

pub(crate) fn pr_forward(model: &FusionModel, pl: &DVector<f64>, r: &DVector<f64>) -> (DVector<f64>, MlpCache) {
    let l = &model.layers;
    mlp_forward(model.params(), l.pr1, l.pr2, concat(&[pl.as_slice(), r.as_slice()]))
}

/// Returns `(d pl, d r)`.
pub(crate) fn pr_backward(
    model: &FusionModel,
    cache: &MlpCache,
    dout: &DVector<f64>,
    grad: &mut [f64],
) -> (DVector<f64>, DVector<f64>) {
    let l = &model.layers;
    let dx = mlp_backward(model.params(), l.pr1, l.pr2, cache, dout, grad, true).expect("input gradient requested");
    let f = model.config().feature_width;
    (dx.rows(0, f).into_owned(), dx.rows(f, f).into_owned())
}

/// Fused feature `PR` from a patch feature and an appearance feature.
pub fn fuse_pr(pl: &FeatureVector, r: &FeatureVector, model: &FusionModel) -> Result<FeatureVector> {
    let f = model.config().feature_width;
    check_width(pl, f, "patch feature")?;
    check_width(r, f, "appearance feature")?;
    let (out, _) = pr_forward(model, &DVector::from_column_slice(&pl.values), &DVector::from_column_slice(&r.values));
    FeatureVector::new(out.as_slice().to_vec())
}

pub(crate) enum TrackletCache {
    /// Window of zero: the single feature passes through unchanged.
    Identity,
    Mlp(MlpCache),
}

/// Slot layout oldest to newest, each slot `[feature, mask bit]`. `slots`
/// must have exactly `window + 1` entries.
pub(crate) fn tracklet_forward(model: &FusionModel, slots: &[Option<DVector<f64>>]) -> (DVector<f64>, TrackletCache) {
    let c = model.config();
    if c.window == 0 {
        let f = slots[0].clone().unwrap_or_else(|| DVector::zeros(c.feature_width));
        return (f, TrackletCache::Identity);
    }
    let f = c.feature_width;
    let mut x = DVector::zeros(slots.len() * (f + 1));
    for (s, slot) in slots.iter().enumerate() {
        if let Some(v) = slot {
            x.rows_mut(s * (f + 1), f).copy_from(v);
            x[s * (f + 1) + f] = 1.0;
        }
    }
    let l = &model.layers;
    let (out, cache) = mlp_forward(model.params(), l.tf1, l.tf2, x);
    (out, TrackletCache::Mlp(cache))
}

/// Gradient for each slot feature (zero for masked slots).
pub(crate) fn tracklet_backward(
    model: &FusionModel,
    cache: &TrackletCache,
    dout: &DVector<f64>,
    grad: &mut [f64],
) -> Vec<DVector<f64>> {
    let c = model.config();
    match cache {
        TrackletCache::Identity => vec![dout.clone()],
        TrackletCache::Mlp(m) => {
            let l = &model.layers;
            let dx = mlp_backward(model.params(), l.tf1, l.tf2, m, dout, grad, true).expect("input gradient requested");
            let f = c.feature_width;
            (0..=c.window).map(|s| dx.rows(s * (f + 1), f).into_owned()).collect()
        }
    }
}

/// Temporal fusion of up to `window + 1` features, oldest first and newest
/// last; `None` marks a frame without an observation. Missing leading slots
/// are masked.
pub fn fuse_tracklet(features: &[Option<FeatureVector>], model: &FusionModel) -> Result<FeatureVector> {
    let c = model.config();
    if features.is_empty() || features.len() > c.window + 1 {
        return Err(Error::InvalidInput(format!(
            "tracklet has {} features, window allows 1..={}",
            features.len(),
            c.window + 1
        )));
    }
    let mut slots: Vec<Option<DVector<f64>>> = vec![None; c.window + 1 - features.len()];
    for f in features {
        if let Some(f) = f {
            check_width(f, c.feature_width, "tracklet feature")?;
        }
        slots.push(f.as_ref().map(|f| DVector::from_column_slice(&f.values)));
    }
    let (out, _) = tracklet_forward(model, &slots);
    FeatureVector::new(out.as_slice().to_vec())
}

/// Depth in meters from any head input feature: `exp(head(feature))`.
pub fn predict_object_depth(feature: &FeatureVector, model: &FusionModel) -> Result<f64> {
    check_width(feature, model.config().feature_width, "head input")?;
    let out = model.layers.head.forward(model.params(), &DVector::from_column_slice(&feature.values));
    Ok(out[0].exp())
}
