use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{backward_sample, forward_sample, DepthSample};
use super::model::{FusionModel, HeadKind};
use crate::scenesim::derive_seed;
use crate::{par, Error, Result};

/// Samples per gradient chunk. Fixed so the floating-point summation order
/// is the same with and without the parallel backend.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LossKind {
    /// Huber-style loss on log residuals with transition point `beta`.
    SmoothL1 { beta: f64 },
    /// Squared log residual.
    L2,
}

impl LossKind {
    /// Loss and its derivative for log residual `r`.
    pub fn eval(self, r: f64) -> (f64, f64) {
        match self {
            LossKind::SmoothL1 { beta } => {
                if r.abs() < beta {
                    (0.5 * r * r / beta, r / beta)
                } else {
                    (r.abs() - 0.5 * beta, r.signum())
                }
            }
            LossKind::L2 => (r * r, 2.0 * r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning rate multiplier reached at the last epoch (cosine schedule).
    pub final_lr_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-3,
            final_lr_fraction: 0.05,
            batch_size: 32,
            epochs: 20,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss: LossKind::SmoothL1 { beta: 0.05 },
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::config("final_lr_fraction", "must be in [0, 1]"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta1/beta2", "must be in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be positive"));
        }
        if let LossKind::SmoothL1 { beta } = self.loss {
            if !(beta > 0.0) {
                return Err(Error::config("loss.beta", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Mean loss over `batch` and its gradient with respect to every parameter.
pub fn loss_and_gradients(
    model: &FusionModel,
    head: HeadKind,
    batch: &[DepthSample],
    loss: LossKind,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let refs: Vec<&DepthSample> = batch.iter().collect();
    batch_gradients(model, head, &refs, loss)
}

fn batch_gradients(model: &FusionModel, head: HeadKind, batch: &[&DepthSample], loss: LossKind) -> Result<(f64, Vec<f64>)> {
    let chunks: Vec<&[&DepthSample]> = batch.chunks(CHUNK).collect();
    let n = model.num_params();
    let partial = par::map(&chunks, |chunk| -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; n];
        let mut total = 0.0;
        for s in chunk.iter() {
            if !(s.target > 0.0 && s.target.is_finite()) {
                return Err(Error::InvalidInput(format!("target depth {} is not positive", s.target)));
            }
            let (out, trace) = forward_sample(model, head, s)?;
            let (l, dl) = loss.eval(out - s.target.ln());
            total += l;
            if dl != 0.0 {
                backward_sample(model, &trace, dl, &mut grad);
            }
        }
        Ok((total, grad))
    });
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for r in partial {
        let (l, g) = r?;
        total += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((total * scale, grad))
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, c: &TrainConfig) {
        self.t += 1;
        let b1t = 1.0 - c.beta1.powi(self.t as i32);
        let b2t = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= lr * mh / (vh.sqrt() + c.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    pub learning_rate: f64,
}

/// Mini-batch training of one head. Batches are drawn from a seeded shuffle,
/// so the result is a pure function of `(model, dataset, config)`.
/// `on_epoch` runs after every epoch (checkpointing, logging); an error from
/// it stops training.
pub fn train<F>(
    model: &mut FusionModel,
    head: HeadKind,
    dataset: &[DepthSample],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<EpochStats>>
where
    F: FnMut(&EpochStats, &FusionModel) -> Result<()>,
{
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let mut adam = Adam::new(model.num_params());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64));
        order.shuffle(&mut rng);
        let progress = if config.epochs > 1 { epoch as f64 / (config.epochs - 1) as f64 } else { 0.0 };
        let f = config.final_lr_fraction;
        let lr = config.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut sum = 0.0;
        let mut batches = 0usize;
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&DepthSample> = idx.iter().map(|&i| &dataset[i]).collect();
            let (loss, grad) = batch_gradients(model, head, &batch, config.loss)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, step, loss });
            }
            adam.step(model.params_mut(), &grad, lr, config);
            sum += loss;
            batches += 1;
        }
        let stats = EpochStats { epoch, loss: sum / batches as f64, learning_rate: lr };
        on_epoch(&stats, model)?;
        history.push(stats);
    }
    Ok(history)
}

/// Predictions for every sample, in order.
pub fn predict_all(model: &FusionModel, head: HeadKind, samples: &[DepthSample]) -> Result<Vec<f64>> {
    par::map(samples, |s| super::forward::predict_sample(model, head, s))
        .into_iter()
        .collect()
}
