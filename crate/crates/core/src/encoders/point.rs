use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{FeatureVector, FusionModel, ModelConfig};
use super::nn::{concat, ramp, ramp_back, ramp_grad};
use crate::geometry::{Point3, PseudoLiDARPatch};
use crate::scenesim::splitmix64;
use crate::Result;

/// Fixed-size encoder input built from one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchInput {
    /// `points_per_patch` centered, scaled points, flattened `[x0, y0, z0, x1, ..]`.
    /// Empty for an empty patch.
    pub points: Vec<f64>,
    /// Centroid cue `(x/z, y/z, ln(z / reference_depth))`.
    pub cue: [f64; 3],
}

impl PatchInput {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn content_hash(points: &[[f64; 3]]) -> u64 {
    points.iter().flatten().fold(0x243f_6a88_85a3_08d3, |h, v| splitmix64(h ^ v.to_bits()))
}

/// Resamples a patch to exactly `points_per_patch` points. Points are put in
/// canonical order first and the sampling seed is derived from their content,
/// so the result does not depend on the input order.
pub fn resample_patch(patch: &PseudoLiDARPatch, config: &ModelConfig) -> PatchInput {
    let n = config.points_per_patch;
    if patch.is_empty() {
        return PatchInput { points: Vec::new(), cue: [0.0; 3] };
    }
    let mut pts: Vec<[f64; 3]> = patch.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    pts.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    // Summed in canonical order so the centroid is bitwise order-independent.
    let mut c = [0.0; 3];
    for p in &pts {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let c = Point3::new(c[0], c[1], c[2]) / pts.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(content_hash(&pts));
    let chosen: Vec<usize> = if pts.len() >= n {
        let mut idx = sample(&mut rng, pts.len(), n).into_vec();
        idx.sort_unstable();
        idx
    } else {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        while idx.len() < n {
            idx.push(rng.random_range(0..pts.len()));
        }
        idx
    };
    let s = config.point_scale;
    let mut points = Vec::with_capacity(3 * n);
    for i in chosen {
        let p = pts[i];
        points.extend_from_slice(&[(p[0] - c.x) / s, (p[1] - c.y) / s, (p[2] - c.z) / s]);
    }
    let z = c.z.max(0.1);
    PatchInput {
        points,
        cue: [c.x / z, c.y / z, (z / config.reference_depth).ln()],
    }
}

pub(crate) struct PointCache {
    x: DMatrix<f64>,
    a1: DMatrix<f64>,
    h1: DMatrix<f64>,
    argmax: Vec<usize>,
    cat: DVector<f64>,
    pre3: DVector<f64>,
}

pub(crate) fn point_forward(model: &FusionModel, input: &PatchInput) -> (DVector<f64>, Option<PointCache>) {
    let p = model.params();
    let l = &model.layers;
    if input.is_empty() {
        let f = model.config().feature_width;
        return (DVector::from_column_slice(&p[l.empty..l.empty + f]), None);
    }
    let n = input.points.len() / 3;
    let x = DMatrix::from_column_slice(3, n, &input.points);
    let a1 = l.point1.forward_columns(p, &x);
    let h1 = a1.map(ramp);
    let z2 = l.point2.forward_columns(p, &h1);
    let c = l.point2.output;
    let mut pooled = vec![f64::NEG_INFINITY; c];
    let mut argmax = vec![0usize; c];
    for j in 0..n {
        let col = z2.column(j);
        for k in 0..c {
            if col[k] > pooled[k] {
                pooled[k] = col[k];
                argmax[k] = j;
            }
        }
    }
    let cat = concat(&[&pooled, &input.cue]);
    let pre3 = l.point3.forward(p, &cat);
    let out = pre3.map(ramp);
    (out, Some(PointCache { x, a1, h1, argmax, cat, pre3 }))
}

pub(crate) fn point_backward(model: &FusionModel, cache: Option<&PointCache>, dout: &DVector<f64>, grad: &mut [f64]) {
    let p = model.params();
    let l = &model.layers;
    let Some(cache) = cache else {
        for (g, d) in grad[l.empty..l.empty + dout.len()].iter_mut().zip(dout.iter()) {
            *g += d;
        }
        return;
    };
    let dpre3 = ramp_back(&cache.pre3, dout);
    let dcat = l.point3.backward(p, grad, cache.cat.as_slice(), dpre3.as_slice());
    let c = l.point2.output;
    let hidden = l.point2.input;
    let w2 = l.point2.weight(p);
    // Only argmax points receive gradient; visit each once.
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by_key(|&k| cache.argmax[k]);
    let mut i = 0;
    while i < order.len() {
        let j = cache.argmax[order[i]];
        let mut dz = vec![0.0; c];
        while i < order.len() && cache.argmax[order[i]] == j {
            dz[order[i]] = dcat[order[i]];
            i += 1;
        }
        l.point2.accumulate(grad, cache.h1.column(j).as_slice(), &dz);
        let mut da1 = vec![0.0; hidden];
        for (k, d) in da1.iter_mut().enumerate() {
            let mut s = 0.0;
            for (kk, &g) in dz.iter().enumerate() {
                s += w2[(kk, k)] * g;
            }
            *d = s * ramp_grad(cache.a1[(k, j)]);
        }
        l.point1.accumulate(grad, cache.x.column(j).as_slice(), &da1);
    }
}

/// Encodes one pseudo-LiDAR patch into a feature. An empty patch returns the
/// model's learned empty embedding.
pub fn encode_patch(patch: &PseudoLiDARPatch, model: &FusionModel) -> Result<FeatureVector> {
    let input = resample_patch(patch, model.config());
    FeatureVector::new(point_forward(model, &input).0.as_slice().to_vec())
}

/// Encodes an already resampled patch.
pub fn encode_patch_input(input: &PatchInput, model: &FusionModel) -> Result<FeatureVector> {
    FeatureVector::new(point_forward(model, input).0.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(n: usize, seed: u64) -> PseudoLiDARPatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(15.0..19.0),
                )
            })
            .collect();
        PseudoLiDARPatch::new(pts, 0)
    }

    #[test]
    fn permutation_invariant_bitwise() {
        let m = FusionModel::new(ModelConfig::default()).unwrap();
        for n in [40, 500] {
            let p = patch(n, n as u64);
            let mut q = p.clone();
            q.points.reverse();
            q.points.rotate_left(7);
            assert_eq!(encode_patch(&p, &m).unwrap(), encode_patch(&q, &m).unwrap());
        }
    }

    #[test]
    fn identical_points_pool_to_single_point() {
        let m = FusionModel::new(ModelConfig::default()).unwrap();
        let input = resample_patch(&PseudoLiDARPatch::new(vec![Point3::new(1.0, 0.5, 12.0); 9], 0), m.config());
        let (_, cache) = point_forward(&m, &input);
        let cache = cache.unwrap();
        let l = &m.layers;
        let single = l.point2.forward(m.params(), &DVector::from_column_slice(cache.h1.column(0).as_slice()));
        for k in 0..l.point2.output {
            assert_eq!(cache.cat[k], single[k]);
        }
    }

    #[test]
    fn empty_patch_uses_empty_embedding() {
        let m = FusionModel::new(ModelConfig::default()).unwrap();
        let f = encode_patch(&PseudoLiDARPatch::new(vec![], 0), &m).unwrap();
        assert_eq!(f.values.as_slice(), m.tensor("point.empty").unwrap());
    }

    #[test]
    fn resample_size_and_centering() {
        let c = ModelConfig::default();
        for n in [1, 50, 128, 900] {
            let r = resample_patch(&patch(n, 3), &c);
            assert_eq!(r.points.len(), 3 * c.points_per_patch);
        }
    }
}
