use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::{example_loss, LossWeights, MfiLoss, Targets};
use super::network::{prediction_from, MtlNetwork};
use super::topology::Task;
use crate::error::{Error, Result};
use crate::features::{Dataset, LabeledExample, OsnrRange, Partition};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub early_stop_patience: usize,
    pub mfi_loss: MfiLoss,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 2000,
            early_stop_patience: 100,
            mfi_loss: MfiLoss::SquaredError,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        // zero is allowed: it freezes the network
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must be in (0, 1), got {b}"));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.early_stop_patience == 0 {
            return bad("batch_size, max_epochs and early_stop_patience must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// NaN when the network has no MFI head or there is no validation data.
    pub val_acc: f64,
    pub val_rmse_db: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Snapshot with the lowest monitored loss.
    pub net: MtlNetwork,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub initial_train_loss: f64,
}

/// Mean loss of `net` over `examples`.
pub fn batch_loss(
    net: &MtlNetwork,
    examples: &[&LabeledExample],
    weights: &LossWeights,
    mfi_loss: MfiLoss,
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for e in examples {
        total += example_loss(&net.outputs(&e.features)?, &Targets::from(*e), weights, mfi_loss);
    }
    Ok(total / examples.len() as f64)
}

struct Monitor {
    loss: f64,
    acc: f64,
    rmse_db: f64,
}

fn monitor(
    net: &MtlNetwork,
    examples: &[&LabeledExample],
    weights: &LossWeights,
    mfi_loss: MfiLoss,
    range: &OsnrRange,
) -> Result<Monitor> {
    if examples.is_empty() {
        return Ok(Monitor { loss: f64::NAN, acc: f64::NAN, rmse_db: f64::NAN });
    }
    let (mut loss, mut hits, mut sq) = (0.0, 0usize, 0.0);
    for e in examples {
        let out = net.outputs(&e.features)?;
        loss += example_loss(&out, &Targets::from(*e), weights, mfi_loss);
        let p = prediction_from(&out, range);
        if p.format == Some(e.format) {
            hits += 1;
        }
        if let Some(o) = p.osnr_db {
            sq += (o - e.osnr_db).powi(2);
        }
    }
    let n = examples.len() as f64;
    Ok(Monitor {
        loss: loss / n,
        acc: if net.has_task(Task::Mfi) { hits as f64 / n } else { f64::NAN },
        rmse_db: if net.has_task(Task::Osnr) { (sq / n).sqrt() } else { f64::NAN },
    })
}

/// Minibatch Adam over the training partition with early stopping on the
/// validation loss (training loss when there is no validation data).
pub fn train(
    net: MtlNetwork,
    ds: &Dataset,
    cfg: &TrainConfig,
    weights: LossWeights,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    weights.validate()?;
    if net.topology.input_size != ds.bin_count() {
        return Err(Error::Shape(format!(
            "network expects {} inputs but the dataset has {} bins",
            net.topology.input_size,
            ds.bin_count()
        )));
    }
    if ds.partition.contains(&Partition::Unassigned) {
        return Err(Error::InvalidConfig("dataset must be partitioned before training".into()));
    }
    let train_set = ds.subset(Partition::Train);
    if train_set.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let val_set = ds.subset(Partition::Val);
    let range = ds.spec.osnr_range();

    let mut net = net;
    net.loss_weights = weights;
    let mut adam = AdamState::new(&net);
    let mut rng = seed::rng(seed::mix(&[cfg.seed, seed::TAG_SHUFFLE]));
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let initial_train_loss = batch_loss(&net, &train_set, &weights, cfg.mfi_loss)?;
    let mut best = net.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut running = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], Targets)> = chunk
                .iter()
                .map(|&i| (train_set[i].features.as_slice(), Targets::from(train_set[i])))
                .collect();
            let scale = 1.0 / batch.len() as f64;
            let mut grads = super::network::Gradients::zeros_like(&net);
            for (x, t) in &batch {
                let pass = net.forward(x)?;
                running += example_loss(&pass.outputs, t, &weights, cfg.mfi_loss);
                net.accumulate_gradients(&pass, t, &weights, cfg.mfi_loss, scale, &mut grads);
            }
            adam_step(&mut net, &mut adam, &grads, cfg);
        }
        let train_loss = running / train_set.len() as f64;
        let val = monitor(&net, &val_set, &weights, cfg.mfi_loss, &range)?;
        if !train_loss.is_finite() || val.loss.is_infinite() || (!val_set.is_empty() && val.loss.is_nan()) {
            return Err(Error::NonFinite { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val.loss,
            val_acc: val.acc,
            val_rmse_db: val.rmse_db,
        });
        let watched = if val_set.is_empty() { train_loss } else { val.loss };
        if watched < best_loss {
            best_loss = watched;
            best = net.clone();
            best_epoch = epoch;
        } else if epoch - best_epoch >= cfg.early_stop_patience {
            break;
        }
    }

    Ok(TrainOutcome {
        net: best,
        history,
        best_epoch,
        initial_train_loss,
    })
}
