use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The five standard per-object depth errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    /// Fraction with `max(p/g, g/p) < 1.25`.
    pub delta1: f64,
}

/// Logarithm used by `rmse_log`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

/// Depth metrics with natural-log `rmse_log`.
pub fn depth_metrics(pred: &[f64], gt: &[f64]) -> Result<DepthMetrics> {
    depth_metrics_with(pred, gt, LogBase::Natural)
}

pub fn depth_metrics_with(pred: &[f64], gt: &[f64], base: LogBase) -> Result<DepthMetrics> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "need equal non-empty lists, got {} predictions and {} targets",
            pred.len(),
            gt.len()
        )));
    }
    if let Some(bad) = pred.iter().chain(gt).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("depths must be positive and finite, got {bad}")));
    }
    let log = |x: f64| match base {
        LogBase::Natural => x.ln(),
        LogBase::Ten => x.log10(),
    };
    let n = pred.len() as f64;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log, mut within) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let d = p - g;
        abs_rel += d.abs() / g;
        sq_rel += d * d / g;
        sq += d * d;
        let dl = log(p) - log(g);
        sq_log += dl * dl;
        if (p / g).max(g / p) < 1.25 {
            within += 1;
        }
    }
    Ok(DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        delta1: within as f64 / n,
    })
}
