use nalgebra::DVector;

use super::fusion::{mlp_backward, mlp_forward, MlpCache};
use super::model::{FeatureVector, FusionModel, ModelConfig};
use crate::geometry::BBox2D;
use crate::scenesim::Appearance;
use crate::{Error, Result};

/// Overlap weights of `grid` equal cells spanning `[lo, hi)` with unit
/// pixels `[i, i + 1)`.
fn axis_weights(lo: f64, hi: f64, grid: usize, limit: usize) -> Vec<Vec<(usize, f64)>> {
    let step = (hi - lo) / grid as f64;
    (0..grid)
        .map(|g| {
            let a = lo + g as f64 * step;
            let b = if g + 1 == grid { hi } else { a + step };
            let first = a.floor().max(0.0) as usize;
            let last = (b.ceil() as usize).min(limit);
            (first..last)
                .filter_map(|i| {
                    let w = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                    (w > 0.0).then_some((i, w))
                })
                .collect()
        })
        .collect()
}

/// Area-averaged `grid x grid` pooling of the channels under `bbox`, followed
/// by four box-geometry scalars: normalized center offset and log relative
/// width and height.
pub fn pool_appearance(appearance: &Appearance, bbox: &BBox2D, config: &ModelConfig) -> Result<Vec<f64>> {
    bbox.validate()?;
    if appearance.data.len() != appearance.width * appearance.height * Appearance::CHANNELS {
        return Err(Error::DimensionMismatch("appearance buffer size".into()));
    }
    let clamped = bbox
        .clamp_to_image(appearance.width, appearance.height)
        .ok_or_else(|| Error::InvalidInput("box does not intersect the image".into()))?;
    let g = config.grid;
    let cols = axis_weights(clamped.x1, clamped.x2, g, appearance.width);
    let rows = axis_weights(clamped.y1, clamped.y2, g, appearance.height);
    let ch = Appearance::CHANNELS;
    let mut out = Vec::with_capacity(config.appearance_input_len());
    for row in &rows {
        for col in &cols {
            let mut acc = [0.0f64; Appearance::CHANNELS];
            let mut total = 0.0;
            for &(v, wv) in row {
                for &(u, wu) in col {
                    let w = wv * wu;
                    let px = appearance.pixel(u, v);
                    for c in 0..ch {
                        acc[c] += w * px[c] as f64;
                    }
                    total += w;
                }
            }
            out.extend(acc.iter().map(|a| if total > 0.0 { a / total } else { 0.0 }));
        }
    }
    let (w, h) = (appearance.width as f64, appearance.height as f64);
    let (uc, vc) = bbox.center();
    out.extend_from_slice(&[uc / w - 0.5, vc / h - 0.5, (bbox.width() / w).ln(), (bbox.height() / h).ln()]);
    Ok(out)
}

pub(crate) fn appearance_forward(model: &FusionModel, input: &[f64]) -> (DVector<f64>, MlpCache) {
    let l = &model.layers;
    mlp_forward(model.params(), l.app1, l.app2, DVector::from_column_slice(input))
}

pub(crate) fn appearance_backward(model: &FusionModel, cache: &MlpCache, dout: &DVector<f64>, grad: &mut [f64]) {
    let l = &model.layers;
    mlp_backward(model.params(), l.app1, l.app2, cache, dout, grad, false);
}

/// Appearance feature `R` for the object in `bbox`.
pub fn encode_appearance(appearance: &Appearance, bbox: &BBox2D, model: &FusionModel) -> Result<FeatureVector> {
    let input = pool_appearance(appearance, bbox, model.config())?;
    encode_appearance_input(&input, model)
}

/// Appearance feature from an already pooled input.
pub fn encode_appearance_input(input: &[f64], model: &FusionModel) -> Result<FeatureVector> {
    if input.len() != model.config().appearance_input_len() {
        return Err(Error::DimensionMismatch(format!(
            "appearance input has {} values, expected {}",
            input.len(),
            model.config().appearance_input_len()
        )));
    }
    FeatureVector::new(appearance_forward(model, input).0.as_slice().to_vec())
}
