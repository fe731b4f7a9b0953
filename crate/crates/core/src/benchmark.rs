//! The standard synthetic benchmark: seeded train/test sequence sets, one
//! model per head variant, median depth metrics over seeds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::{build_dataset, predict_all, train, DatasetOptions, DepthDataset, FusionModel, HeadKind, ModelConfig, TrainConfig};
use crate::headroom::PerturbationProfile;
use crate::io::{fmt_metric, format_kv, format_table};
use crate::metrics::{depth_metrics, DepthMetrics};
use crate::tracking::Tracker3DParams;
use crate::scenesim::{derive_seed, generate_sequence, SceneConfig, Sequence};
use crate::{par, Error, Result};

/// Offset separating test-sequence seeds from training-sequence seeds.
const TEST_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scene: SceneConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub dataset: DatasetOptions,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub seeds: Vec<u64>,
    /// Simulated-detector errors for the headroom analysis.
    pub headroom: PerturbationProfile,
    pub tracker: Tracker3DParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig { epochs: 12, ..TrainConfig::default() },
            dataset: DatasetOptions::default(),
            train_sequences: 96,
            test_sequences: 24,
            seeds: vec![0, 1, 2],
            headroom: PerturbationProfile::default(),
            tracker: Tracker3DParams::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.dataset.window != self.model.window {
            return Err(Error::config("dataset.window", "must equal model.window"));
        }
        if self.train_sequences == 0 || self.test_sequences == 0 {
            return Err(Error::config("train_sequences", "train and test sets must be non-empty"));
        }
        self.headroom.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        Ok(())
    }

    /// Same benchmark with a different window for model and dataset.
    pub fn with_window(mut self, window: usize) -> Self {
        self.model.window = window;
        self.dataset.window = window;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Sequence seed of the `index`-th sequence of a split.
pub fn sequence_seed(seed: u64, split: Split, index: usize) -> u64 {
    let stream = match split {
        Split::Train => index as u64,
        Split::Test => TEST_STREAM + index as u64,
    };
    derive_seed(seed, stream)
}

pub fn generate_split(cfg: &BenchmarkConfig, seed: u64, split: Split) -> Result<Vec<Sequence>> {
    let n = match split {
        Split::Train => cfg.train_sequences,
        Split::Test => cfg.test_sequences,
    };
    par::map_range(n, |i| generate_sequence(&cfg.scene, sequence_seed(seed, split, i))).into_iter().collect()
}

/// A head plus the dataset switch that distinguishes the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub head: HeadKind,
    pub compensate_ego_motion: bool,
}

impl Variant {
    pub fn new(head: HeadKind) -> Self {
        Self { head, compensate_ego_motion: true }
    }

    pub fn without_compensation(head: HeadKind) -> Self {
        Self { head, compensate_ego_motion: false }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.compensate_ego_motion {
            f.write_str(self.head.name())
        } else {
            write!(f, "{}-nocomp", self.head.name())
        }
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.strip_suffix("-nocomp") {
            Some(h) => Ok(Self::without_compensation(h.parse()?)),
            None => Ok(Self::new(s.parse()?)),
        }
    }
}

/// Trains a fresh model for `head` with the model seed set to `seed`.
pub fn train_head(cfg: &BenchmarkConfig, head: HeadKind, seed: u64, data: &DepthDataset) -> Result<FusionModel> {
    let mut model = FusionModel::new(ModelConfig { seed, ..cfg.model.clone() })?;
    let tc = TrainConfig { seed, ..cfg.train.clone() };
    train(&mut model, head, &data.samples, &tc, |_, _| Ok(()))?;
    Ok(model)
}

pub fn evaluate_head(model: &FusionModel, head: HeadKind, data: &DepthDataset) -> Result<DepthMetrics> {
    let pred = predict_all(model, head, &data.samples)?;
    depth_metrics(&pred, &data.targets())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub name: String,
    pub per_seed: Vec<DepthMetrics>,
    pub median: DepthMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<VariantResult>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Field-wise median over seeds.
pub fn median_metrics(ms: &[DepthMetrics]) -> DepthMetrics {
    let f = |g: fn(&DepthMetrics) -> f64| median(ms.iter().map(g).collect());
    DepthMetrics {
        abs_rel: f(|m| m.abs_rel),
        sq_rel: f(|m| m.sq_rel),
        rmse: f(|m| m.rmse),
        rmse_log: f(|m| m.rmse_log),
        delta1: f(|m| m.delta1),
    }
}

impl BenchmarkResult {
    pub fn get(&self, name: &str) -> Option<&VariantResult> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn abs_rel(&self, name: &str) -> Option<f64> {
        self.get(name).map(|r| r.median.abs_rel)
    }

    /// Median metrics per variant, one row each.
    pub fn render(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let m = &r.median;
                vec![
                    r.name.clone(),
                    fmt_metric(100.0 * m.abs_rel, 2),
                    fmt_metric(m.sq_rel, 4),
                    fmt_metric(m.rmse, 3),
                    fmt_metric(m.rmse_log, 4),
                    fmt_metric(100.0 * m.delta1, 2),
                ]
            })
            .collect();
        format_table(&["head", "abs_rel%", "sq_rel", "rmse", "rmse_log", "delta1%"], &rows)
    }

    /// `variant.metric = value` lines for the medians and every seed.
    pub fn to_kv(&self) -> String {
        let mut e = Vec::new();
        let mut push = |prefix: String, m: &DepthMetrics| {
            for (k, v) in [("abs_rel", m.abs_rel), ("sq_rel", m.sq_rel), ("rmse", m.rmse), ("rmse_log", m.rmse_log), ("delta1", m.delta1)] {
                e.push((format!("{prefix}.{k}"), format!("{v:.6}")));
            }
        };
        for r in &self.rows {
            push(r.name.clone(), &r.median);
            for (i, m) in r.per_seed.iter().enumerate() {
                push(format!("{}.seed{i}", r.name), m);
            }
        }
        format_kv(&e)
    }
}

/// Trains and evaluates every variant for every seed.
pub fn run_benchmark(cfg: &BenchmarkConfig, variants: &[Variant]) -> Result<BenchmarkResult> {
    cfg.validate()?;
    if variants.is_empty() {
        return Err(Error::InvalidInput("no variants requested".into()));
    }
    let mut per_variant: Vec<Vec<DepthMetrics>> = vec![Vec::new(); variants.len()];
    for &seed in &cfg.seeds {
        let train_seqs = generate_split(cfg, seed, Split::Train)?;
        let test_seqs = generate_split(cfg, seed, Split::Test)?;
        for comp in [true, false] {
            if !variants.iter().any(|v| v.compensate_ego_motion == comp) {
                continue;
            }
            let opts = DatasetOptions { compensate_ego_motion: comp, ..cfg.dataset.clone() };
            let train_ds = build_dataset(&train_seqs, &opts, &cfg.model)?;
            let test_ds = build_dataset(&test_seqs, &opts, &cfg.model)?;
            for (k, v) in variants.iter().enumerate() {
                if v.compensate_ego_motion == comp {
                    let model = train_head(cfg, v.head, seed, &train_ds)?;
                    per_variant[k].push(evaluate_head(&model, v.head, &test_ds)?);
                }
            }
        }
    }
    let rows = variants
        .iter()
        .zip(per_variant)
        .map(|(v, per_seed)| VariantResult { name: v.to_string(), median: median_metrics(&per_seed), per_seed })
        .collect();
    Ok(BenchmarkResult { rows })
}
