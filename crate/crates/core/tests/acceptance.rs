//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. The benchmark criteria (5, 6, 8) share trained models.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use prtfusion::benchmark::{evaluate_head, generate_split, median_metrics, train_head, BenchmarkConfig, Split};
use prtfusion::encoders::{
    build_dataset, encode_appearance, encode_patch_input, frame_input, fuse_pr, fuse_tracklet, loss_and_gradients,
    pool_appearance, predict_all, predict_object_depth, resample_patch, AssociationMode, DatasetOptions, DepthDataset,
    DepthSample, FeatureVector, FusionModel, HeadKind, LossKind, ModelConfig,
};
use prtfusion::geometry::{
    chamfer_distance, compensate_ego_motion, crop_patch, lift_depth_map, pose_from_euler, BBox2D, Box3D, DepthMap,
    Point3, PseudoLiDARPatch,
};
use prtfusion::headroom::{
    evaluate_detections, headroom_report, simulate_detector, substitute_depths, AttributeTag, HeadroomMetrics,
    SequenceDetections,
};
use prtfusion::io::{decode_sequence, encode_sequence, parse_kitti_labels};
use prtfusion::metrics::{
    average_precision, depth_metrics, iou_3d, iou_bev, mot_metrics, DetectionRecord, GroundTruthBox, MotOutcome,
    TrackedBox,
};
use prtfusion::scenesim::{camera_pose, corrupt_depth, generate_sequence, render, ObjectState, SceneConfig, Sequence, NO_OWNER};
use prtfusion::tracking::min_cost_assignment;
use prtfusion::Error;
use rand::Rng;

use common::*;

const MARGIN: f64 = 0.005;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let out = match (out, budget) {
        (Ok(d), Some(b)) if elapsed > b => Err(format!("{d}; runtime {:.1}s over the {}s budget", elapsed.as_secs_f64(), b.as_secs())),
        (o, _) => o,
    };
    let (tag, detail, pass) = match out {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{name}: {tag} ({:.1}s) {detail}", elapsed.as_secs_f64());
    pass
}

// 1. Geometry

fn ac1_geometry() -> Check {
    let cam = SceneConfig::default().camera.intrinsics().unwrap();
    let mut r = rng(1);

    let mut depth = DepthMap::empty(cam.width, cam.height);
    for v in 0..cam.height {
        for u in 0..cam.width {
            depth.set(u, v, r.random_range(0.5..80.0f32));
        }
    }
    let cloud = lift_depth_map(&depth, &cam).unwrap();
    let mut round_trip = 0.0f64;
    for (p, &(u, v)) in cloud.points.iter().zip(&cloud.pixels) {
        let (pu, pv, pz) = cam.project(p).unwrap();
        round_trip = round_trip.max((pu - u as f64).abs()).max((pv - v as f64).abs());
        round_trip = round_trip.max((pz - depth.get(u, v) as f64).abs() / pz);
    }
    ensure(round_trip <= 1e-9, || format!("lift/project round trip error {round_trip:e}"))?;

    let pose = |r: &mut rand_chacha::ChaCha8Rng| {
        pose_from_euler(
            [r.random_range(-20.0..20.0), r.random_range(-20.0..20.0), r.random_range(0.0..3.0)],
            [r.random_range(-0.2..0.2), r.random_range(-0.2..0.2), r.random_range(-3.0..3.0)],
        )
    };
    let max_dist = |a: &PseudoLiDARPatch, b: &PseudoLiDARPatch| {
        a.points.iter().zip(&b.points).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    };
    let (mut identity, mut composition) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let pts = (0..200)
            .map(|_| Point3::new(r.random_range(-10.0..10.0), r.random_range(-3.0..3.0), r.random_range(1.0..60.0)))
            .collect();
        let patch = PseudoLiDARPatch::new(pts, 0);
        let (h0, h1, h2) = (pose(&mut r), pose(&mut r), pose(&mut r));
        identity = identity.max(max_dist(&compensate_ego_motion(&patch, &h0, &h0).unwrap(), &patch));
        let two_step = compensate_ego_motion(&compensate_ego_motion(&patch, &h1, &h0).unwrap(), &h2, &h1).unwrap();
        let direct = compensate_ego_motion(&patch, &h2, &h0).unwrap();
        composition = composition.max(max_dist(&two_step, &direct));
    }
    ensure(identity <= 1e-10, || format!("identity compensation error {identity:e}"))?;
    ensure(composition <= 1e-10, || format!("composition error {composition:e}"))?;

    // A parked car seen from two ego poses; only its own pixels are kept.
    let car = ObjectState { id: 0, center: [16.0, 3.0, 0.75], size: [4.2, 1.8, 1.5], yaw: 0.4, velocity: [0.0, 0.0] };
    let poses = [camera_pose(0.0, 0.0, 0.0, 0.0, 1.6), camera_pose(1.5, 0.1, 0.03, 0.01, 1.6)];
    let patches: Vec<PseudoLiDARPatch> = poses
        .iter()
        .map(|p| {
            let out = render(p, &[car], &cam, 120.0);
            let mut d = out.depth.clone();
            let (mut u0, mut v0, mut u1, mut v1) = (usize::MAX, usize::MAX, 0, 0);
            for v in 0..cam.height {
                for u in 0..cam.width {
                    if out.owner[v * cam.width + u] == NO_OWNER {
                        d.set(u, v, DepthMap::SENTINEL);
                    } else {
                        (u0, v0, u1, v1) = (u0.min(u), v0.min(v), u1.max(u), v1.max(v));
                    }
                }
            }
            let b = BBox2D::new(u0 as f64, v0 as f64, (u1 + 1) as f64, (v1 + 1) as f64).unwrap();
            crop_patch(&d, &cam, &b, 0).unwrap()
        })
        .collect();
    let moved = compensate_ego_motion(&patches[0], &poses[1], &poses[0]).unwrap();
    let chamfer = chamfer_distance(&patches[1].points, &moved.points).unwrap();
    let z = poses[1].inverse().apply(&Point3::from(car.center)).z;
    let bound = z / cam.fx;
    ensure(chamfer <= bound, || format!("static-object chamfer {chamfer:.4} m above the pixel footprint {bound:.4} m"))?;
    Ok(format!("round trip {round_trip:.1e}, identity {identity:.1e}, composition {composition:.1e}, chamfer {chamfer:.4} <= {bound:.4} m"))
}

// 2. Oracle equivalence

fn small_config(window: usize) -> ModelConfig {
    ModelConfig { window, feature_width: 6, point_hidden: 5, point_channels: 7, points_per_patch: 12, grid: 2, hidden: 8, seed: 3, ..Default::default() }
}

fn random_patch(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> PseudoLiDARPatch {
    let c = [r.random_range(-3.0..3.0), r.random_range(-1.0..1.0), r.random_range(8.0..30.0)];
    let pts = (0..n)
        .map(|_| Point3::new(c[0] + r.random_range(-1.5..1.5), c[1] + r.random_range(-1.0..1.0), c[2] + r.random_range(-1.0..1.0)))
        .collect();
    PseudoLiDARPatch::new(pts, 0)
}

fn random_image(r: &mut rand_chacha::ChaCha8Rng, w: usize, h: usize) -> prtfusion::scenesim::Appearance {
    prtfusion::scenesim::Appearance { width: w, height: h, data: (0..w * h * 4).map(|_| r.random_range(0.0..1.0f32)).collect() }
}

fn random_sample(r: &mut rand_chacha::ChaCha8Rng, cfg: &ModelConfig, frames: usize) -> DepthSample {
    let img = random_image(r, 24, 12);
    let frames = (0..frames)
        .map(|k| {
            if k == 0 && frames > 2 {
                return None;
            }
            let (x1, y1) = (r.random_range(0.0..10.0), r.random_range(0.0..5.0));
            let b = BBox2D::new(x1, y1, x1 + r.random_range(2.0..10.0), y1 + r.random_range(2.0..6.0)).unwrap();
            let n = r.random_range(3..30);
            Some(frame_input(&random_patch(r, n), &img, &b, cfg).unwrap())
        })
        .collect();
    DepthSample { frames, target: r.random_range(5.0..40.0) }
}

fn encoder_oracles() -> std::result::Result<f64, String> {
    let mut r = rng(77);
    let mut model = FusionModel::new(ModelConfig { window: 3, seed: 5, ..Default::default() }).unwrap();
    for v in model.params_mut() {
        *v += r.random_range(-0.02..0.02);
    }
    let c = model.config().clone();
    let mut worst = 0.0f64;

    let input = resample_patch(&random_patch(&mut r, 300), &c);
    let pl = encode_patch_input(&input, &model).unwrap();
    worst = worst.max(max_abs_diff(&pl.values, &oracle_patch(&model, &input)));

    let img = random_image(&mut r, 96, 48);
    let b = BBox2D::new(10.4, 7.7, 51.2, 33.9).unwrap();
    let pooled = pool_appearance(&img, &b, &c).unwrap();
    let rgb = encode_appearance(&img, &b, &model).unwrap();
    worst = worst.max(max_abs_diff(&rgb.values, &oracle_mlp(&model, "appearance", c.appearance_input_len(), &pooled)));

    let cat: Vec<f64> = pl.values.iter().chain(&rgb.values).copied().collect();
    let pr = fuse_pr(&pl, &rgb, &model).unwrap();
    worst = worst.max(max_abs_diff(&pr.values, &oracle_mlp(&model, "fuse_pr", 2 * c.feature_width, &cat)));

    let w = c.feature_width;
    let feats: Vec<Option<FeatureVector>> = (0..c.window + 1)
        .map(|k| (k != 1).then(|| FeatureVector::new((0..w).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()))
        .collect();
    let mut slots = Vec::new();
    for f in &feats {
        match f {
            Some(f) => {
                slots.extend_from_slice(&f.values);
                slots.push(1.0);
            }
            None => slots.extend(std::iter::repeat_n(0.0, w + 1)),
        }
    }
    let tf = fuse_tracklet(&feats, &model).unwrap();
    worst = worst.max(max_abs_diff(&tf.values, &oracle_mlp(&model, "fuse_tracklet", feats.len() * (w + 1), &slots)));

    let logit = lin(model.tensor("head.weight").unwrap(), model.tensor("head.bias").unwrap(), w, 1, &tf.values)[0];
    worst = worst.max((predict_object_depth(&tf, &model).unwrap() - logit.exp()).abs() / logit.exp());
    Ok(worst)
}

fn gradient_errors() -> std::result::Result<f64, String> {
    let mut worst = 0.0f64;
    for head in HeadKind::ALL {
        let window = 2;
        let cfg = small_config(window);
        let mut r = rng(head as u64 * 31 + 7);
        let mut model = FusionModel::new(cfg.clone()).unwrap();
        for v in model.params_mut() {
            *v += r.random_range(-0.05..0.05);
        }
        let batch: Vec<DepthSample> = (0..3).map(|_| random_sample(&mut r, &cfg, window + 1)).collect();
        let loss = LossKind::L2;
        let (_, grad) = loss_and_gradients(&model, head, &batch, loss).unwrap();
        let h = 1e-5;
        for t in model.tensors().to_vec() {
            let mut num = Vec::with_capacity(t.len());
            for i in t.range() {
                let orig = model.params()[i];
                model.params_mut()[i] = orig + h;
                let (lp, _) = loss_and_gradients(&model, head, &batch, loss).unwrap();
                model.params_mut()[i] = orig - h;
                let (lm, _) = loss_and_gradients(&model, head, &batch, loss).unwrap();
                model.params_mut()[i] = orig;
                num.push((lp - lm) / (2.0 * h));
            }
            let ana = &grad[t.range()];
            let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let diff: Vec<f64> = ana.iter().zip(&num).map(|(a, b)| a - b).collect();
            let scale = norm(ana).max(norm(&num));
            // Tensors outside this head's graph have zero gradient both ways.
            if scale < 1e-9 {
                continue;
            }
            let rel = norm(&diff) / scale;
            ensure(rel < 1e-4, || format!("{head} {}: gradient relative error {rel:e}", t.name))?;
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn ac2_oracles() -> Check {
    let forward = encoder_oracles()?;
    ensure(forward <= 1e-10, || format!("encoder forward vs oracle {forward:e}"))?;
    let grad = gradient_errors()?;

    let mut r = rng(2);
    let mut cases = 0;
    for rows in 1..=5 {
        for cols in 1..=5 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..rows * cols).map(|_| r.random_range(0..20) as f64).collect();
                let a = min_cost_assignment(&cost, rows, cols);
                let mut seen = vec![false; cols];
                let mut total = 0.0;
                let mut assigned = 0;
                for (i, c) in a.iter().enumerate() {
                    if let Some(c) = *c {
                        ensure(!seen[c], || format!("column {c} assigned twice"))?;
                        seen[c] = true;
                        total += cost[i * cols + c];
                        assigned += 1;
                    }
                }
                let best = brute_force_assignment_cost(&cost, rows, cols);
                ensure(assigned == rows.min(cols) && total == best, || format!("{rows}x{cols}: assignment cost {total} vs brute force {best}"))?;
                cases += 1;
            }
        }
    }

    let mut iou_err = 0.0f64;
    for _ in 0..100 {
        let a = random_box(&mut r, 1.0);
        let mut b = random_box(&mut r, 1.0);
        b.center[0] = a.center[0] + r.random_range(-1.5..1.5);
        b.center[1] = a.center[1] + r.random_range(-1.5..1.5);
        iou_err = iou_err.max((iou_bev(&a, &b) - grid_iou_bev(&a, &b, 1000)).abs());
        iou_err = iou_err.max((iou_3d(&a, &b) - grid_iou_3d(&a, &b, 1000)).abs());
    }
    ensure(iou_err <= 2e-3, || format!("IoU vs integration oracle {iou_err:e}"))?;

    let mut ap_cases = 0;
    for case in 0..300 {
        let n_gt = r.random_range(1..8);
        let gts: Vec<GroundTruthBox> = (0..n_gt)
            .map(|i| GroundTruthBox { frame_index: case % 3, bbox3d: Box3D { center: [10.0 * i as f64, 0.0, 0.8], size: [4.0, 2.0, 1.6], yaw: 0.0 } })
            .collect();
        let n_det = r.random_range(1..=20);
        let mut targets = Vec::new();
        let mut scores = Vec::new();
        let dets: Vec<DetectionRecord> = (0..n_det)
            .map(|_| {
                let target = (r.random_range(0.0..1.0) < 0.7).then(|| r.random_range(0..n_gt));
                let mut b = Box3D { center: [-100.0, 0.0, 0.8], size: [4.0, 2.0, 1.6], yaw: 0.0 };
                if let Some(g) = target {
                    b = gts[g].bbox3d;
                    b.center[0] += r.random_range(-0.2..0.2);
                }
                let score = r.random_range(0.0..1.0);
                targets.push(target);
                scores.push(score);
                DetectionRecord { frame_index: case % 3, bbox3d: b, score }
            })
            .collect();
        let ap = average_precision(&dets, &gts, iou_3d, 0.7);
        let oracle = prefix_enumeration_ap(&targets, &scores, n_gt);
        ensure((ap - oracle).abs() <= 1e-12, || format!("AP {ap} vs prefix oracle {oracle}"))?;
        ap_cases += 1;
    }
    Ok(format!(
        "forward {forward:.1e}, gradient {grad:.1e}, assignment {cases} cases exact, IoU {iou_err:.1e}, AP {ap_cases} cases exact"
    ))
}

// 3. Metric identities

fn ac3_metrics() -> Check {
    let gt = [5.0, 12.5, 30.0, 47.25, 80.0];
    let mut worst = 0.0f64;
    for s in [1.1, 1.5, 2.0] {
        let pred: Vec<f64> = gt.iter().map(|g| s * g).collect();
        let m = depth_metrics(&pred, &gt).unwrap();
        worst = worst.max((m.abs_rel - (s - 1.0)).abs()).max((m.rmse_log - s.ln()).abs());
    }
    ensure(worst <= 1e-12, || format!("scale law error {worst:e}"))?;

    let m = depth_metrics(&[11.0], &[10.0]).unwrap();
    let worked = [m.abs_rel - 0.1, m.sq_rel - 0.1, m.rmse - 1.0, m.rmse_log - 1.1f64.ln(), m.delta1 - 1.0];
    ensure(worked.iter().all(|d| d.abs() <= 1e-9), || format!("worked example {m:?}"))?;
    ensure((m.rmse_log - 0.09531).abs() < 5e-6, || format!("rmse_log {}", m.rmse_log))?;

    let mut r = rng(3);
    for _ in 0..50 {
        let frames = 10;
        let mut gt = Vec::new();
        let mut trk = Vec::new();
        for _ in 0..frames {
            let g: Vec<TrackedBox> = (0..r.random_range(0..5))
                .map(|i| TrackedBox { id: i, bbox3d: Box3D { center: [8.0 * i as f64, 0.0, 0.8], size: [4.0, 2.0, 1.6], yaw: 0.0 } })
                .collect();
            let mut t = Vec::new();
            for b in &g {
                if r.random_range(0.0..1.0) < 0.8 {
                    t.push(TrackedBox { id: b.id + 10 * r.random_range(0..2), bbox3d: b.bbox3d });
                }
            }
            for k in 0..r.random_range(0..2) {
                t.push(TrackedBox { id: 99 + k, bbox3d: Box3D { center: [-50.0, 0.0, 0.8], size: [4.0, 2.0, 1.6], yaw: 0.0 } });
            }
            gt.push(g);
            trk.push(t);
        }
        match mot_metrics(&trk, &gt, 2.0).unwrap() {
            MotOutcome::Report(m) => {
                let expect = 1.0 - (m.fn_ + m.fp + m.ids) as f64 / m.gt_count as f64;
                ensure(m.mota == expect, || format!("MOTA {} vs identity {expect}", m.mota))?;
                ensure(m.matches + m.fn_ == m.gt_count, || "matches + misses != ground truth".into())?;
            }
            MotOutcome::NoGroundTruth { .. } => {}
        }
    }
    Ok(format!("scale law {worst:.1e}, worked example and MOTA identity exact"))
}

// 4. Noise calibration

fn ac4_noise() -> Check {
    let (w, h) = (500, 400);
    let mut r = rng(4);
    let values: Vec<f32> = (0..w * h).map(|_| r.random_range(2.0..80.0f32)).collect();
    let clean = DepthMap::new(w, h, values).unwrap();
    let noisy = corrupt_depth(&clean, 0.08, 11);
    let err: f64 =
        clean.values.iter().zip(&noisy.values).map(|(c, n)| ((*n as f64) - (*c as f64)).abs() / *c as f64).sum::<f64>() / (w * h) as f64;
    ensure((err - 0.08).abs() <= 0.002, || format!("mean relative error {err:.5} over {} pixels", w * h))?;
    Ok(format!("mean relative error {err:.5} over {} pixels", w * h))
}

// 5, 6, 8. Trained-model benchmark

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct RunKey {
    head: HeadKind,
    gt_association: bool,
    compensate: bool,
    window: usize,
}

impl RunKey {
    fn label(&self) -> String {
        format!(
            "{}{}{}{}",
            self.head.name(),
            if self.compensate { "" } else { "-nocomp" },
            if self.gt_association { "/gt" } else { "/pred" },
            if self.window == 1 { String::new() } else { format!("/n={}", self.window) }
        )
    }
}

struct BenchState {
    cfg: BenchmarkConfig,
    abs_rel: HashMap<RunKey, Vec<f64>>,
    /// Seed-0 PRT model, its test sequences and test dataset.
    prt: Option<(FusionModel, Vec<Sequence>, DepthDataset)>,
}

impl BenchState {
    fn median(&self, k: RunKey) -> f64 {
        let v = &self.abs_rel[&k];
        let ms: Vec<_> = v.iter().map(|&a| prtfusion::metrics::DepthMetrics { abs_rel: a, sq_rel: 0.0, rmse: 0.0, rmse_log: 0.0, delta1: 0.0 }).collect();
        median_metrics(&ms).abs_rel
    }

    /// Trains every key not yet evaluated, reusing scenes and datasets per seed.
    fn ensure_runs(&mut self, keys: &[RunKey]) -> prtfusion::Result<()> {
        let todo: Vec<RunKey> = keys.iter().copied().filter(|k| !self.abs_rel.contains_key(k)).collect();
        if todo.is_empty() {
            return Ok(());
        }
        let cfg = self.cfg.clone();
        for &seed in &cfg.seeds {
            let train_seqs = generate_split(&cfg, seed, Split::Train)?;
            let test_seqs = generate_split(&cfg, seed, Split::Test)?;
            let mut groups: Vec<(bool, bool, usize)> = todo.iter().map(|k| (k.gt_association, k.compensate, k.window)).collect();
            groups.dedup();
            groups.sort_by_key(|g| (g.0, !g.1, g.2));
            groups.dedup();
            for (gt, comp, window) in groups {
                let opts = DatasetOptions {
                    window,
                    association: if gt { AssociationMode::Gt } else { AssociationMode::Predicted },
                    compensate_ego_motion: comp,
                    ..cfg.dataset.clone()
                };
                let bcfg = cfg.clone().with_window(window);
                let train_ds = build_dataset(&train_seqs, &opts, &bcfg.model)?;
                let test_ds = build_dataset(&test_seqs, &opts, &bcfg.model)?;
                for k in todo.iter().filter(|k| (k.gt_association, k.compensate, k.window) == (gt, comp, window)) {
                    let model = train_head(&bcfg, k.head, seed, &train_ds)?;
                    let m = evaluate_head(&model, k.head, &test_ds)?;
                    eprintln!("  seed {seed} {:<24} abs_rel {:.4}", k.label(), m.abs_rel);
                    self.abs_rel.entry(*k).or_default().push(m.abs_rel);
                    if seed == cfg.seeds[0] && k.head == HeadKind::Prt && !gt && comp && window == 1 {
                        self.prt = Some((model, test_seqs.clone(), test_ds.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn key(head: HeadKind) -> RunKey {
    RunKey { head, gt_association: false, compensate: true, window: 1 }
}

fn pp(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn ac5_ordering(state: &mut BenchState) -> Check {
    let mut keys: Vec<RunKey> = HeadKind::ALL.iter().map(|&h| key(h)).collect();
    keys.push(RunKey { compensate: false, ..key(HeadKind::T) });
    state.ensure_runs(&keys).map_err(|e| e.to_string())?;
    let m = |h: HeadKind| state.median(key(h));
    let (pl, rgb, pr, t, prt, rgbt) =
        (m(HeadKind::Pl), m(HeadKind::Rgb), m(HeadKind::Pr), m(HeadKind::T), m(HeadKind::Prt), m(HeadKind::RgbTemporal));
    let t_nocomp = state.median(RunKey { compensate: false, ..key(HeadKind::T) });
    let summary = format!(
        "abs_rel% pl {} rgb {} pr {} prt {} t {} t-nocomp {} rgb-temporal {}",
        pp(pl),
        pp(rgb),
        pp(pr),
        pp(prt),
        pp(t),
        pp(t_nocomp),
        pp(rgbt)
    );
    let mut failures = Vec::new();
    if !(prt <= pr) {
        failures.push("prt > pr".to_string());
    }
    if !(pr + MARGIN <= pl.min(rgb)) {
        failures.push(format!("pr margin over min(pl, rgb) {} pp < 0.5", pp(pl.min(rgb) - pr)));
    }
    if !(t + MARGIN <= t_nocomp) {
        failures.push(format!("compensation margin {} pp < 0.5", pp(t_nocomp - t)));
    }
    if !(rgb - rgbt < MARGIN) {
        failures.push(format!("rgb-temporal gains {} pp over rgb", pp(rgb - rgbt)));
    }
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn ac6_association(state: &mut BenchState) -> Check {
    // Single-frame heads never read past frames, so association cannot
    // change their samples; confirm on one seed instead of retraining.
    let cfg = state.cfg.clone();
    let seqs = generate_split(&cfg, cfg.seeds[0], Split::Test).map_err(|e| e.to_string())?;
    let build = |a| {
        build_dataset(&seqs, &DatasetOptions { association: a, ..cfg.dataset.clone() }, &cfg.model).map_err(|e| e.to_string())
    };
    let (pred_ds, gt_ds) = (build(AssociationMode::Predicted)?, build(AssociationMode::Gt)?);
    let same_current = pred_ds.samples.iter().zip(&gt_ds.samples).all(|(a, b)| a.current() == b.current() && a.target == b.target);
    ensure(same_current && pred_ds.samples.len() == gt_ds.samples.len(), || "association changed current-frame inputs".into())?;

    let temporal = [HeadKind::T, HeadKind::Prt, HeadKind::RgbTemporal];
    let mut keys: Vec<RunKey> = temporal.iter().map(|&h| RunKey { gt_association: true, ..key(h) }).collect();
    keys.extend([HeadKind::T, HeadKind::Prt].iter().map(|&h| RunKey { gt_association: true, window: 3, ..key(h) }));
    state.ensure_runs(&keys).map_err(|e| e.to_string())?;

    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for h in temporal {
        let (p, g) = (state.median(key(h)), state.median(RunKey { gt_association: true, ..key(h) }));
        parts.push(format!("{} gt {} pred {}", h.name(), pp(g), pp(p)));
        if g > p {
            failures.push(format!("{}: gt association worse ({} > {})", h.name(), pp(g), pp(p)));
        }
    }
    for h in [HeadKind::T, HeadKind::Prt] {
        let n1 = state.median(RunKey { gt_association: true, ..key(h) });
        let n3 = state.median(RunKey { gt_association: true, window: 3, ..key(h) });
        parts.push(format!("{} gt n=3 {} n=1 {}", h.name(), pp(n3), pp(n1)));
        if n3 > n1 {
            failures.push(format!("{}: n=3 worse than n=1 with gt association", h.name()));
        }
    }
    let summary = format!("abs_rel% {}; single-frame heads association-invariant", parts.join(", "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

// 7. Headroom

fn test_detections(cfg: &BenchmarkConfig, seqs: &[Sequence]) -> prtfusion::Result<Vec<SequenceDetections>> {
    seqs.iter().map(|s| simulate_detector(s, &cfg.headroom)).collect()
}

fn ac7_headroom(cfg: &BenchmarkConfig) -> Check {
    let seqs = generate_split(cfg, cfg.seeds[0], Split::Test).map_err(|e| e.to_string())?;
    let dets = test_detections(cfg, &seqs).map_err(|e| e.to_string())?;
    let report = headroom_report(&seqs, &dets, &cfg.tracker).map_err(|e| e.to_string())?;
    let base = *report.baseline();
    let gain = |tag| {
        let m = report.row(tag).unwrap();
        (m.ap_3d[2] - base.ap_3d[2], m.mota - base.mota)
    };
    let mut failures = Vec::new();
    let (d_ap, d_mota) = gain(AttributeTag::Depth);
    for tag in AttributeTag::SINGLE.into_iter().filter(|t| *t != AttributeTag::Depth) {
        let (ap, mota) = gain(tag);
        if ap >= d_ap {
            failures.push(format!("{tag} AP@0.7 gain {ap:.3} >= depth {d_ap:.3}"));
        }
        if mota >= d_mota {
            failures.push(format!("{tag} MOTA gain {mota:.3} >= depth {d_mota:.3}"));
        }
    }
    let all = report.row(AttributeTag::All).unwrap();
    if !(all.ap_3d.iter().chain(&all.ap_bev).all(|&a| a == 1.0) && all.mota == 1.0) {
        failures.push(format!("all-attributes row AP {:?} MOTA {}", all.ap_3d, all.mota));
    }
    let summary = format!(
        "baseline AP3D@0.7 {:.3} MOTA {:.3}; depth gains AP {d_ap:.3} MOTA {d_mota:.3}; all-GT AP 1 MOTA 1",
        base.ap_3d[2], base.mota
    );
    println!("{}", report.render().trim_end());
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

// 8. Enhanced depth

fn ac8_enhanced(state: &mut BenchState) -> Check {
    state.ensure_runs(&[key(HeadKind::Prt)]).map_err(|e| e.to_string())?;
    let (model, seqs, ds) = state.prt.as_ref().ok_or("seed-0 PRT model missing")?;
    let pred = predict_all(model, HeadKind::Prt, &ds.samples).map_err(|e| e.to_string())?;
    let lookup: HashMap<(usize, usize, usize), f64> = ds.sources.iter().zip(&pred).map(|(s, &d)| ((s.sequence, s.frame, s.object), d)).collect();
    let cfg = &state.cfg;
    let dets = test_detections(cfg, seqs).map_err(|e| e.to_string())?;
    let enhanced: Vec<SequenceDetections> = seqs
        .iter()
        .zip(&dets)
        .enumerate()
        .map(|(si, (s, d))| {
            substitute_depths(s, d, |f, label| {
                let k = s.frames[f].objects.iter().position(|o| o.id == label.id)?;
                lookup.get(&(si, f, k)).copied()
            })
        })
        .collect::<prtfusion::Result<_>>()
        .map_err(|e| e.to_string())?;
    let base: HeadroomMetrics = evaluate_detections(seqs, &dets, &cfg.tracker).map_err(|e| e.to_string())?;
    let enh = evaluate_detections(seqs, &enhanced, &cfg.tracker).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    for (i, thr) in [0.5, 0.6, 0.7].iter().enumerate() {
        if !(enh.ap_3d[i] > base.ap_3d[i]) {
            failures.push(format!("AP3D@{thr} {:.3} vs {:.3}", enh.ap_3d[i], base.ap_3d[i]));
        }
        if !(enh.ap_bev[i] > base.ap_bev[i]) {
            failures.push(format!("APBEV@{thr} {:.3} vs {:.3}", enh.ap_bev[i], base.ap_bev[i]));
        }
    }
    if !(enh.mota > base.mota) {
        failures.push(format!("MOTA {:.3} vs {:.3}", enh.mota, base.mota));
    }
    if enh.ids > base.ids {
        failures.push(format!("IDS {} vs {}", enh.ids, base.ids));
    }
    let summary = format!(
        "AP3D {:.3}/{:.3}/{:.3} -> {:.3}/{:.3}/{:.3}, APBEV {:.3}/{:.3}/{:.3} -> {:.3}/{:.3}/{:.3}, MOTA {:.3} -> {:.3}, IDS {} -> {}",
        base.ap_3d[0], base.ap_3d[1], base.ap_3d[2], enh.ap_3d[0], enh.ap_3d[1], enh.ap_3d[2],
        base.ap_bev[0], base.ap_bev[1], base.ap_bev[2], enh.ap_bev[0], enh.ap_bev[1], enh.ap_bev[2],
        base.mota, enh.mota, base.ids, enh.ids
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

// 9. Determinism and I/O

fn small_pipeline(seed: u64) -> prtfusion::Result<String> {
    let mut cfg = BenchmarkConfig::default();
    cfg.scene.frames = 5;
    cfg.train_sequences = 3;
    cfg.test_sequences = 2;
    cfg.train.epochs = 2;
    let train_seqs = generate_split(&cfg, seed, Split::Train)?;
    let test_seqs = generate_split(&cfg, seed, Split::Test)?;
    let train_ds = build_dataset(&train_seqs, &cfg.dataset, &cfg.model)?;
    let test_ds = build_dataset(&test_seqs, &cfg.dataset, &cfg.model)?;
    let model = train_head(&cfg, HeadKind::Prt, seed, &train_ds)?;
    let m = evaluate_head(&model, HeadKind::Prt, &test_ds)?;
    let dets = test_detections(&cfg, &test_seqs)?;
    let report = headroom_report(&test_seqs, &dets, &cfg.tracker)?;
    let bytes: Vec<u8> = test_seqs.iter().map(encode_sequence).collect::<prtfusion::Result<Vec<_>>>()?.concat();
    Ok(format!("{m:?}\n{}\n{:08x}", report.render(), crc32fast::hash(&bytes)))
}

fn ac9_determinism() -> Check {
    let a = small_pipeline(5).map_err(|e| e.to_string())?;
    let b = small_pipeline(5).map_err(|e| e.to_string())?;
    ensure(a == b, || "pipeline reports differ between identical runs".into())?;

    let cfg = SceneConfig { frames: 4, ..SceneConfig::default() };
    for seed in [0, 9] {
        let seq = generate_sequence(&cfg, seed).map_err(|e| e.to_string())?;
        let bytes = encode_sequence(&seq).map_err(|e| e.to_string())?;
        let back = decode_sequence(&bytes).map_err(|e| e.to_string())?;
        ensure(back == seq, || format!("archive round trip changed sequence {seed}"))?;
        ensure(encode_sequence(&back).unwrap() == bytes, || "re-encoding is not byte-identical".into())?;
    }

    let good = "0 1 Car 0 0 -1.5 100 120 180 170 1.5 1.7 4.2 1.0 1.6 15.0 -1.5";
    let text = [good, good, "0 2 Car 0 0 -1.5 100 120 oops 170 1.5 1.7 4.2 1.0 1.6 15.0 -1.5", good, good].join("\n");
    match parse_kitti_labels(&text) {
        Err(Error::Parse { line: 3, .. }) => {}
        other => return Err(format!("malformed KITTI line 3 gave {other:?}")),
    }
    Ok("pipeline digits identical across reruns, archive bit-exact, KITTI error at line 3".into())
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run("AC1 geometry", Some(Duration::from_secs(5)), ac1_geometry);
    ok &= run("AC2 oracle equivalence", Some(Duration::from_secs(60)), ac2_oracles);
    ok &= run("AC3 metric identities", None, ac3_metrics);
    ok &= run("AC4 noise calibration", None, ac4_noise);
    let mut state = BenchState { cfg: BenchmarkConfig::default(), abs_rel: HashMap::new(), prt: None };
    ok &= run("AC5 fusion ordering", Some(Duration::from_secs(15 * 60)), || ac5_ordering(&mut state));
    ok &= run("AC6 association quality", None, || ac6_association(&mut state));
    let cfg = state.cfg.clone();
    ok &= run("AC7 headroom", None, || ac7_headroom(&cfg));
    ok &= run("AC8 enhanced depth", None, || ac8_enhanced(&mut state));
    ok &= run("AC9 determinism and I/O", None, ac9_determinism);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
