use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nn::Linear;
use crate::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Temporal window `n`: fusion covers frames `t-n ..= t`.
    pub window: usize,
    pub feature_width: usize,
    /// Width of the first shared per-point layer.
    pub point_hidden: usize,
    /// Per-point channels entering the max-pool.
    pub point_channels: usize,
    pub points_per_patch: usize,
    /// Appearance pooling grid side.
    pub grid: usize,
    /// Hidden width of the appearance, PR and temporal fusion transforms.
    pub hidden: usize,
    /// Meters per unit for centered patch coordinates.
    pub point_scale: f64,
    /// Depth at which the log-depth cue and the head bias are centered.
    pub reference_depth: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 1,
            feature_width: 64,
            point_hidden: 32,
            point_channels: 64,
            points_per_patch: 128,
            grid: 8,
            hidden: 128,
            point_scale: 2.0,
            reference_depth: 20.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("feature_width", self.feature_width),
            ("point_hidden", self.point_hidden),
            ("point_channels", self.point_channels),
            ("points_per_patch", self.points_per_patch),
            ("grid", self.grid),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !(self.point_scale > 0.0 && self.point_scale.is_finite()) {
            return Err(Error::config("point_scale", "must be positive"));
        }
        if !(self.reference_depth > 0.0 && self.reference_depth.is_finite()) {
            return Err(Error::config("reference_depth", "must be positive"));
        }
        Ok(())
    }

    /// Length of a pooled appearance input: grid cells times channels plus
    /// four box-geometry scalars.
    pub fn appearance_input_len(&self) -> usize {
        self.grid * self.grid * crate::scenesim::Appearance::CHANNELS + 4
    }
}

/// Which feature feeds the depth head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    /// Pseudo-LiDAR patch at the current frame.
    Pl,
    /// Appearance at the current frame.
    Rgb,
    /// Patch and appearance fused.
    Pr,
    /// Patch features fused over the window.
    T,
    /// Temporal patch fusion, then fused with current appearance.
    Prt,
    /// Appearance features fused over the window.
    RgbTemporal,
}

impl HeadKind {
    pub const ALL: [HeadKind; 6] = [
        HeadKind::Pl,
        HeadKind::Rgb,
        HeadKind::Pr,
        HeadKind::T,
        HeadKind::Prt,
        HeadKind::RgbTemporal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Pl => "pl",
            HeadKind::Rgb => "rgb",
            HeadKind::Pr => "pr",
            HeadKind::T => "t",
            HeadKind::Prt => "prt",
            HeadKind::RgbTemporal => "rgb-temporal",
        }
    }

    pub fn is_temporal(self) -> bool {
        matches!(self, HeadKind::T | HeadKind::Prt | HeadKind::RgbTemporal)
    }

    pub fn uses_points(self) -> bool {
        !matches!(self, HeadKind::Rgb | HeadKind::RgbTemporal)
    }

    pub fn uses_appearance(self) -> bool {
        !matches!(self, HeadKind::Pl | HeadKind::T)
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HeadKind::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown head '{s}' (expected pl, rgb, pr, t, prt, rgb-temporal)")))
    }
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A named slice of the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layers {
    pub point1: Linear,
    pub point2: Linear,
    pub point3: Linear,
    pub empty: usize,
    pub app1: Linear,
    pub app2: Linear,
    pub pr1: Linear,
    pub pr2: Linear,
    pub tf1: Linear,
    pub tf2: Linear,
    pub head: Linear,
}

fn layout(c: &ModelConfig) -> (Layers, Vec<TensorSpec>, usize) {
    let mut specs = Vec::new();
    let mut off = 0usize;
    let mut linear = |name: &str, input: usize, output: usize, specs: &mut Vec<TensorSpec>| {
        let l = Linear { offset: off, input, output };
        specs.push(TensorSpec { name: format!("{name}.weight"), shape: vec![output, input], offset: off });
        specs.push(TensorSpec { name: format!("{name}.bias"), shape: vec![output], offset: off + input * output });
        off += l.len();
        l
    };
    let f = c.feature_width;
    let point1 = linear("point.1", 3, c.point_hidden, &mut specs);
    let point2 = linear("point.2", c.point_hidden, c.point_channels, &mut specs);
    let point3 = linear("point.3", c.point_channels + 3, f, &mut specs);
    let app1 = linear("appearance.1", c.appearance_input_len(), c.hidden, &mut specs);
    let app2 = linear("appearance.2", c.hidden, f, &mut specs);
    let pr1 = linear("fuse_pr.1", 2 * f, c.hidden, &mut specs);
    let pr2 = linear("fuse_pr.2", c.hidden, f, &mut specs);
    let tf1 = linear("fuse_tracklet.1", (c.window + 1) * (f + 1), c.hidden, &mut specs);
    let tf2 = linear("fuse_tracklet.2", c.hidden, f, &mut specs);
    let head = linear("head", f, 1, &mut specs);
    let empty = off;
    specs.push(TensorSpec { name: "point.empty".into(), shape: vec![f], offset: off });
    off += f;
    let layers = Layers { point1, point2, point3, empty, app1, app2, pr1, pr2, tf1, tf2, head };
    (layers, specs, off)
}

/// Parameters of every learnable component plus the architecture they
/// belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    config: ModelConfig,
    params: Vec<f64>,
    tensors: Vec<TensorSpec>,
    pub(crate) layers: Layers,
}

impl FusionModel {
    /// Random initialization (scaled normal weights, zero biases) seeded by
    /// `config.seed`. The head bias starts at the log reference depth.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (layers, tensors, n) = layout(&config);
        let mut params = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for l in [
            layers.point1,
            layers.point2,
            layers.point3,
            layers.app1,
            layers.app2,
            layers.pr1,
            layers.pr2,
            layers.tf1,
            layers.tf2,
            layers.head,
        ] {
            let scale = (2.0 / l.input as f64).sqrt();
            for w in &mut params[l.offset..l.offset + l.weight_len()] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = scale * z;
            }
        }
        let head_bias = layers.head.offset + layers.head.weight_len();
        params[head_bias] = config.reference_depth.ln();
        Ok(Self { config, params, tensors, layers })
    }

    /// Rebuilds a model from stored parameters; the tensor table must match
    /// the layout implied by `config`.
    pub fn from_parts(config: ModelConfig, tensors: &[TensorSpec], params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let (layers, expected, n) = layout(&config);
        if tensors != expected.as_slice() {
            return Err(Error::Format("tensor table does not match model configuration".into()));
        }
        if params.len() != n {
            return Err(Error::DimensionMismatch(format!("expected {n} parameters, got {}", params.len())));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(Self { config, params, tensors: expected, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &self.params[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.tensors.iter().find(|t| t.name == name)?.range();
        Some(&mut self.params[r])
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }
}

/// A feature produced by one of the encoders or fusion transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
