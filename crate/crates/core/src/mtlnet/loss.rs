use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LabeledExample, N_CLASSES};

/// Per-task weights of the multi-task objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub w_mfi: f64,
    pub w_osnr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_mfi: 1.0,
            w_osnr: 5.0,
        }
    }
}

impl LossWeights {
    /// `w_mfi = 1`, `w_osnr = ratio`.
    pub fn from_ratio(ratio: f64) -> Self {
        Self {
            w_mfi: 1.0,
            w_osnr: ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_mfi > 0.0 && self.w_osnr > 0.0 && self.w_mfi.is_finite() && self.w_osnr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be positive, got ({}, {})",
                self.w_mfi, self.w_osnr
            )));
        }
        Ok(())
    }
}

/// Loss on the classification head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MfiLoss {
    #[default]
    SquaredError,
    /// Ablation only.
    CrossEntropy,
}

/// Network outputs. A head is `None` when the network lacks that branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub mfi_probs: Option<[f64; N_CLASSES]>,
    pub osnr_norm: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Targets {
    pub onehot: [f64; N_CLASSES],
    pub osnr_norm: f64,
}

impl From<&LabeledExample> for Targets {
    fn from(e: &LabeledExample) -> Self {
        Self {
            onehot: e.format_onehot,
            osnr_norm: e.osnr_norm,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Weighted squared-error loss of one example over the heads present.
pub fn mtl_loss(out: &Outputs, target: &Targets, weights: &LossWeights) -> f64 {
    example_loss(out, target, weights, MfiLoss::SquaredError)
}

pub fn example_loss(out: &Outputs, target: &Targets, weights: &LossWeights, mfi: MfiLoss) -> f64 {
    let mut j = 0.0;
    if let Some(p) = &out.mfi_probs {
        let term: f64 = match mfi {
            MfiLoss::SquaredError => p.iter().zip(&target.onehot).map(|(h, y)| (y - h).powi(2)).sum(),
            MfiLoss::CrossEntropy => -p
                .iter()
                .zip(&target.onehot)
                .map(|(h, y)| if *y > 0.0 { y * h.max(f64::MIN_POSITIVE).ln() } else { 0.0 })
                .sum::<f64>(),
        };
        j += weights.w_mfi * term;
    }
    if let Some(h) = out.osnr_norm {
        j += weights.w_osnr * (target.osnr_norm - h).powi(2);
    }
    j
}

/// Mean loss over a batch; shapes must agree.
pub fn batch_mtl_loss(outs: &[Outputs], targets: &[Targets], weights: &LossWeights) -> Result<f64> {
    if outs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: outs.len(),
            actual: targets.len(),
        });
    }
    if outs.is_empty() {
        return Ok(0.0);
    }
    Ok(outs.iter().zip(targets).map(|(o, t)| mtl_loss(o, t, weights)).sum::<f64>() / outs.len() as f64)
}
