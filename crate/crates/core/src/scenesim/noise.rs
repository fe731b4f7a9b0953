use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::render::{RenderOutput, NO_OWNER};
use crate::geometry::DepthMap;

/// Smallest depth a corrupted pixel may take.
const MIN_DEPTH: f32 = 1e-3;

/// Multiplicative i.i.d. Gaussian depth noise.
///
/// Each valid pixel becomes `z (1 + e)` with `e ~ N(0, s)` and
/// `s = target * sqrt(pi / 2)`, so that `E|e| = target`. Sentinels are kept.
pub fn corrupt_depth(depth: &DepthMap, target_mean_rel_error: f64, seed: u64) -> DepthMap {
    assert!(target_mean_rel_error >= 0.0, "target must be non-negative");
    if target_mean_rel_error == 0.0 {
        return depth.clone();
    }
    let sigma = target_mean_rel_error * (std::f64::consts::PI / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = depth
        .values
        .iter()
        .map(|&z| {
            if z == DepthMap::SENTINEL {
                z
            } else {
                let e: f64 = normal.sample(&mut rng);
                ((z as f64) * (1.0 + e)).max(MIN_DEPTH as f64) as f32
            }
        })
        .collect();
    DepthMap {
        width: depth.width,
        height: depth.height,
        values,
    }
}

/// Fraction of an object's visible extent by which its error region grows on
/// each side.
const REGION_MARGIN: f64 = 0.2;

/// Spatially correlated per-object depth error. Object `k` draws
/// `b_k ~ N(0, std)`; its pixels and the unowned pixels of its dilated image
/// extent (ground, background) are scaled by `(1 + b_k)`. Where dilated
/// extents overlap, the nearer object wins.
pub(crate) fn apply_object_bias(out: &RenderOutput, n_objects: usize, std: f64, seed: u64) -> DepthMap {
    let mut depth = out.depth.clone();
    if std == 0.0 || n_objects == 0 {
        return depth;
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias: Vec<f64> = (0..n_objects).map(|_| normal.sample(&mut rng)).collect();

    let (w, h) = (depth.width, depth.height);
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n_objects];
    let mut nearest = vec![f32::INFINITY; n_objects];
    for v in 0..h {
        for u in 0..w {
            let o = out.owner[v * w + u];
            if o == NO_OWNER {
                continue;
            }
            let k = o as usize;
            let b = &mut bounds[k];
            *b = (b.0.min(u), b.1.min(v), b.2.max(u + 1), b.3.max(v + 1));
            nearest[k] = nearest[k].min(out.depth.values[v * w + u]);
        }
    }
    let mut region = out.owner.clone();
    let mut order: Vec<usize> = (0..n_objects).filter(|&k| nearest[k].is_finite()).collect();
    order.sort_by(|&a, &b| nearest[a].total_cmp(&nearest[b]));
    for k in order {
        let (u0, v0, u1, v1) = bounds[k];
        let mu = (REGION_MARGIN * (u1 - u0) as f64).ceil() as usize;
        let mv = (REGION_MARGIN * (v1 - v0) as f64).ceil() as usize;
        for v in v0.saturating_sub(mv)..(v1 + mv).min(h) {
            for u in u0.saturating_sub(mu)..(u1 + mu).min(w) {
                let r = &mut region[v * w + u];
                if *r == NO_OWNER {
                    *r = k as u32;
                }
            }
        }
    }
    for (z, &o) in depth.values.iter_mut().zip(&region) {
        if o != NO_OWNER && *z != DepthMap::SENTINEL {
            *z = ((*z as f64) * (1.0 + bias[o as usize])).max(MIN_DEPTH as f64) as f32;
        }
    }
    depth
}
