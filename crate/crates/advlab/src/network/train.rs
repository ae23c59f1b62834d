//! Plain SGD training with deterministic shuffling, an optional global
//! gradient-norm limit, and optional label smoothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{argmax, Tensor};

use super::Network;

/// Hyperparameters for [`train_sgd`]. Every random choice during training
/// (shuffling and batching) derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Upper bound on each batch's global parameter-gradient L2 norm
    /// (gradient masking). A limit of 0 freezes the parameters.
    pub grad_norm_limit: Option<f64>,
    /// Label smoothing mass in [0, 1); 0 trains on one-hot targets.
    pub label_smoothing: f64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate,
            epochs,
            batch_size,
            seed,
            grad_norm_limit: None,
            label_smoothing: 0.0,
        }
    }

    fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::arg(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(Error::arg(format!(
                "batch_size {} out of range for dataset of {dataset_len}",
                self.batch_size
            )));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::arg(format!(
                "label_smoothing must be in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if let Some(limit) = self.grad_norm_limit {
            if limit < 0.0 || !limit.is_finite() {
                return Err(Error::arg(format!(
                    "grad_norm_limit must be non-negative, got {limit}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// Per-example training target: a class index or a full distribution.
#[derive(Debug, Clone)]
pub(crate) enum Target {
    Hard(usize),
    Soft(Vec<f64>),
}

/// Per-batch image replacement hook; used for adversarial training.
///
/// Called with the current model, the running batch ordinal, and the item
/// indices of the batch; returns one optional replacement image per slot.
pub(crate) type AugmentHook<'a> =
    Box<dyn FnMut(&Network, usize, &[usize]) -> Result<Vec<Option<Tensor>>> + 'a>;

/// Trains a copy of `net` with plain SGD and returns it with the per-epoch
/// loss/accuracy history. Identical seeds give bit-identical parameters.
pub fn train_sgd(
    net: &Network,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Network, Vec<EpochStats>)> {
    let smoothing = cfg.label_smoothing;
    let class_count = net.class_count();
    let target_of = move |idx: usize| -> Result<Target> {
        let label = data.items[idx].label;
        if smoothing > 0.0 {
            Ok(Target::Soft(crate::defenses::smooth_labels(
                label,
                class_count,
                smoothing,
            )?))
        } else {
            Ok(Target::Hard(label))
        }
    };
    train_loop(net, data, cfg, 1.0, &target_of, None)
}

/// Shared training loop behind [`train_sgd`] and the defense trainers.
///
/// `temperature` scales the softmax during training (defensive
/// distillation trains the student at a raised temperature). `target_of`
/// maps an item index to its target distribution and `augment` optionally
/// replaces batch images in place.
pub(crate) fn train_loop(
    net: &Network,
    data: &Dataset,
    cfg: &TrainConfig,
    temperature: f64,
    target_of: &dyn Fn(usize) -> Result<Target>,
    mut augment: Option<AugmentHook<'_>>,
) -> Result<(Network, Vec<EpochStats>)> {
    cfg.validate(data.len())?;
    if data.class_count != net.class_count() {
        return Err(Error::arg(format!(
            "dataset has {} classes but network expects {}",
            data.class_count,
            net.class_count()
        )));
    }

    let mut net = net.clone();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_ordinal = 0usize;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            let replacements = match augment.as_mut() {
                Some(hook) => hook(&net, batch_ordinal, batch)?,
                None => Vec::new(),
            };

            let mut acc: BTreeMap<String, Tensor> = net
                .params()
                .iter()
                .map(|(name, p)| (name.clone(), Tensor::zeros(p.shape().clone())))
                .collect();

            for (slot, &idx) in batch.iter().enumerate() {
                let item = &data.items[idx];
                let image = replacements
                    .get(slot)
                    .and_then(|r| r.as_ref())
                    .unwrap_or(&item.pixels);
                let target = target_of(idx)?;
                let out = net.backprop(image, &target, temperature)?;
                if !out.loss.is_finite() {
                    return Err(Error::NonFinite("training loss"));
                }
                epoch_loss += out.loss;
                if argmax(&out.probs)? == item.label {
                    correct += 1;
                }
                for (name, grad) in out.bundle.param_grads {
                    let slot = acc.get_mut(&name).expect("gradient names match params");
                    for (a, g) in slot.data_mut().iter_mut().zip(grad.data()) {
                        *a += g;
                    }
                }
            }

            let inv = 1.0 / batch.len() as f64;
            for grad in acc.values_mut() {
                for g in grad.data_mut() {
                    *g *= inv;
                }
            }

            if let Some(limit) = cfg.grad_norm_limit {
                let norm = global_norm(&acc);
                let scale = if limit == 0.0 {
                    0.0
                } else if norm > limit {
                    limit / norm
                } else {
                    1.0
                };
                if scale != 1.0 {
                    for grad in acc.values_mut() {
                        for g in grad.data_mut() {
                            *g *= scale;
                        }
                    }
                }
            }

            net.apply_update(&acc, cfg.learning_rate)?;
            batch_ordinal += 1;
        }

        history.push(EpochStats {
            epoch,
            mean_loss: epoch_loss / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        });
    }

    Ok((net, history))
}

fn global_norm(grads: &BTreeMap<String, Tensor>) -> f64 {
    grads
        .values()
        .flat_map(|g| g.data())
        .map(|&v| v * v)
        .sum::<f64>()
        .sqrt()
}
