//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use prtfusion::geometry::Box3D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn inside_bev(b: &Box3D, x: f64, y: f64) -> bool {
    let (c, s) = (b.yaw.cos(), b.yaw.sin());
    let dx = x - b.center[0];
    let dy = y - b.center[1];
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= 0.5 * b.size[0] && ly.abs() <= 0.5 * b.size[1]
}

/// Footprint intersection and union areas by midpoint-grid integration
/// over the joint bounding square.
fn grid_areas(a: &Box3D, b: &Box3D, n: usize) -> (f64, f64, f64) {
    let r = |q: &Box3D| 0.5 * q.size[0].hypot(q.size[1]);
    let x0 = (a.center[0] - r(a)).min(b.center[0] - r(b));
    let x1 = (a.center[0] + r(a)).max(b.center[0] + r(b));
    let y0 = (a.center[1] - r(a)).min(b.center[1] - r(b));
    let y1 = (a.center[1] + r(a)).max(b.center[1] + r(b));
    let (hx, hy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (mut ia, mut ib, mut both) = (0usize, 0usize, 0usize);
    for i in 0..n {
        let x = x0 + (i as f64 + 0.5) * hx;
        for j in 0..n {
            let y = y0 + (j as f64 + 0.5) * hy;
            let (pa, pb) = (inside_bev(a, x, y), inside_bev(b, x, y));
            ia += pa as usize;
            ib += pb as usize;
            both += (pa && pb) as usize;
        }
    }
    let cell = hx * hy;
    (ia as f64 * cell, ib as f64 * cell, both as f64 * cell)
}

pub fn grid_iou_bev(a: &Box3D, b: &Box3D, n: usize) -> f64 {
    let (sa, sb, i) = grid_areas(a, b, n);
    i / (sa + sb - i)
}

/// 3D IoU of vertical prisms: footprint grid times a 1D grid over height.
pub fn grid_iou_3d(a: &Box3D, b: &Box3D, n: usize) -> f64 {
    let (sa, sb, i) = grid_areas(a, b, n);
    let lo = |q: &Box3D| q.center[2] - 0.5 * q.size[2];
    let hi = |q: &Box3D| q.center[2] + 0.5 * q.size[2];
    let (z0, z1) = (lo(a).min(lo(b)), hi(a).max(hi(b)));
    let m = 4 * n;
    let hz = (z1 - z0) / m as f64;
    let mut zo = 0usize;
    for k in 0..m {
        let z = z0 + (k as f64 + 0.5) * hz;
        zo += (z >= lo(a) && z <= hi(a) && z >= lo(b) && z <= hi(b)) as usize;
    }
    let inter = i * zo as f64 * hz;
    inter / (sa * a.size[2] + sb * b.size[2] - inter)
}

pub fn random_box(r: &mut ChaCha8Rng, spread: f64) -> Box3D {
    Box3D {
        center: [r.random_range(-spread..spread), r.random_range(-spread..spread), r.random_range(0.5..1.2)],
        size: [r.random_range(1.0..5.0), r.random_range(1.0..3.0), r.random_range(1.0..2.0)],
        yaw: r.random_range(-3.1..3.1),
    }
}

/// Minimum total cost over every injective row-to-column map.
pub fn brute_force_assignment_cost(cost: &[f64], rows: usize, cols: usize) -> f64 {
    fn go(cost: &[f64], rows: usize, cols: usize, r: usize, used: &mut Vec<bool>, assigned: usize, need: usize) -> f64 {
        if assigned == need {
            return 0.0;
        }
        if r == rows {
            return f64::INFINITY;
        }
        let mut best = if rows - r - 1 >= need - assigned {
            go(cost, rows, cols, r + 1, used, assigned, need)
        } else {
            f64::INFINITY
        };
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[r * cols + c] + go(cost, rows, cols, r + 1, used, assigned + 1, need));
                used[c] = false;
            }
        }
        best
    }
    go(cost, rows, cols, 0, &mut vec![false; cols], 0, rows.min(cols))
}

/// AP by enumerating every prefix of the score-ordered detection list.
/// `targets[k]` is the ground-truth index detection `k` overlaps (at most
/// one), `scores[k]` its score.
pub fn prefix_enumeration_ap(targets: &[Option<usize>], scores: &[f64], n_gt: usize) -> f64 {
    if n_gt == 0 || targets.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut taken = vec![false; n_gt];
    let mut tp = 0usize;
    let mut points = Vec::new();
    for (k, &d) in order.iter().enumerate() {
        if let Some(g) = targets[d] {
            if !taken[g] {
                taken[g] = true;
                tp += 1;
            }
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..points.len() {
        let envelope = points[k..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (points[k].0 - prev_recall) * envelope;
        prev_recall = points[k].0;
    }
    ap
}

// Unvectorized encoder forwards, written against the named tensors.

use prtfusion::encoders::{ramp, FusionModel, PatchInput};

pub fn lin(w: &[f64], b: &[f64], input: usize, output: usize, x: &[f64]) -> Vec<f64> {
    (0..output)
        .map(|o| {
            let mut acc = b[o];
            for i in 0..input {
                acc += w[i * output + o] * x[i];
            }
            acc
        })
        .collect()
}

fn t<'a>(m: &'a FusionModel, name: &str) -> &'a [f64] {
    m.tensor(name).unwrap()
}

pub fn oracle_patch(m: &FusionModel, input: &PatchInput) -> Vec<f64> {
    let c = m.config();
    let n = input.points.len() / 3;
    let mut pooled = vec![f64::NEG_INFINITY; c.point_channels];
    for j in 0..n {
        let x = &input.points[3 * j..3 * j + 3];
        let h: Vec<f64> = lin(t(m, "point.1.weight"), t(m, "point.1.bias"), 3, c.point_hidden, x).into_iter().map(ramp).collect();
        let z = lin(t(m, "point.2.weight"), t(m, "point.2.bias"), c.point_hidden, c.point_channels, &h);
        for k in 0..c.point_channels {
            pooled[k] = pooled[k].max(z[k]);
        }
    }
    let mut cat = pooled;
    cat.extend_from_slice(&input.cue);
    lin(t(m, "point.3.weight"), t(m, "point.3.bias"), c.point_channels + 3, c.feature_width, &cat)
        .into_iter()
        .map(ramp)
        .collect()
}

pub fn oracle_mlp(m: &FusionModel, prefix: &str, input: usize, x: &[f64]) -> Vec<f64> {
    let c = m.config();
    let h: Vec<f64> = lin(t(m, &format!("{prefix}.1.weight")), t(m, &format!("{prefix}.1.bias")), input, c.hidden, x)
        .into_iter()
        .map(ramp)
        .collect();
    lin(t(m, &format!("{prefix}.2.weight")), t(m, &format!("{prefix}.2.bias")), c.hidden, c.feature_width, &h)
        .into_iter()
        .map(ramp)
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
