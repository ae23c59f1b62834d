//! Proactive and reactive defenses: adversarial training, label smoothing,
//! defensive distillation, and an adversarial-input detector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::{self, AttackConfig, TargetSelection};
use crate::datasets::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::network::{
    train_loop, train_sgd, AugmentHook, LayerSpec, Network, Target, TrainConfig,
};
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{argmax, Tensor};

/// Fraction of each batch replaced by adversarial counterparts when no
/// explicit ratio is configured.
pub const DEFAULT_MIX_RATIO: f64 = 0.5;

/// Softmax temperature used for distillation when none is configured.
pub const DEFAULT_DISTILL_TEMPERATURE: f64 = 20.0;

/// Smoothed target distribution: mass `1 - s` on the true class and
/// `s / (K - 1)` on every other class.
pub fn smooth_labels(y: usize, class_count: usize, s: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::arg(format!("smoothing must be in [0, 1), got {s}")));
    }
    if y >= class_count {
        return Err(Error::arg(format!(
            "label {y} out of range for {class_count} classes"
        )));
    }
    if class_count == 1 {
        if s > 0.0 {
            return Err(Error::arg("cannot smooth labels with a single class"));
        }
        return Ok(vec![1.0]);
    }
    let off = s / (class_count - 1) as f64;
    let mut dist = vec![off; class_count];
    dist[y] = 1.0 - s;
    Ok(dist)
}

/// Adversarial-training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvTrainConfig {
    pub base: TrainConfig,
    /// Attack run against the in-training model's own gradients.
    pub attack: AttackConfig,
    /// Fraction of each batch replaced by adversarial counterparts.
    pub mix_ratio: f64,
}

/// Trains a copy of `init` with a `mix_ratio` fraction of every batch
/// replaced by adversarial versions generated against the current
/// parameters (labels unchanged). With `mix_ratio = 0` this is bitwise
/// `train_sgd`.
pub fn adversarial_train(init: &Network, data: &Dataset, cfg: &AdvTrainConfig) -> Result<Network> {
    if !(0.0..=1.0).contains(&cfg.mix_ratio) {
        return Err(Error::arg(format!(
            "mix_ratio must be in [0, 1], got {}",
            cfg.mix_ratio
        )));
    }
    let smoothing = cfg.base.label_smoothing;
    let class_count = init.class_count();
    let target_of = move |idx: usize| -> Result<Target> {
        let label = data.items[idx].label;
        if smoothing > 0.0 {
            Ok(Target::Soft(smooth_labels(label, class_count, smoothing)?))
        } else {
            Ok(Target::Hard(label))
        }
    };

    let mix_ratio = cfg.mix_ratio;
    let attack_template = cfg.attack;
    let hook: AugmentHook<'_> = Box::new(move |net, batch_ordinal, batch| {
        let n_replace =
            ((mix_ratio * batch.len() as f64).round() as usize).min(batch.len());
        let mut replacements = vec![None; batch.len()];
        for (slot, &idx) in batch.iter().enumerate().take(n_replace) {
            let mut per_item = attack_template;
            if let TargetSelection::Random { seed } = per_item.target {
                // Independent target stream per (batch, slot).
                per_item.target = TargetSelection::Random {
                    seed: derive_seed(seed, (batch_ordinal as u64) * 1_000_003 + slot as u64),
                };
            }
            let outcome = attacks::attack(net, &data.items[idx], &per_item)?;
            replacements[slot] = Some(outcome.adversarial);
        }
        Ok(replacements)
    });

    let (net, _) = train_loop(init, data, &cfg.base, 1.0, &target_of, Some(hook))?;
    Ok(net)
}

/// Defensive-distillation parameters: the teacher is trained on hard
/// labels, the strictly smaller student on the teacher's
/// temperature-softened outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub teacher_layers: Vec<LayerSpec>,
    pub teacher_train: TrainConfig,
    pub student_layers: Vec<LayerSpec>,
    pub temperature: f64,
}

/// Runs the distillation pipeline and returns the student, which is meant
/// to be deployed at temperature 1.
pub fn distill(data: &Dataset, cfg: &DistillConfig, seed: u64) -> Result<Network> {
    if cfg.temperature <= 0.0 || !cfg.temperature.is_finite() {
        return Err(Error::arg(format!(
            "temperature must be positive, got {}",
            cfg.temperature
        )));
    }
    let input_shape = data.image_shape();
    let teacher = Network::new(
        input_shape,
        cfg.teacher_layers.clone(),
        data.class_count,
        derive_seed(seed, 1),
    )?;
    let student = Network::new(
        input_shape,
        cfg.student_layers.clone(),
        data.class_count,
        derive_seed(seed, 2),
    )?;
    if student.param_count() >= teacher.param_count() {
        return Err(Error::arg(format!(
            "student ({} params) must be strictly smaller than teacher ({} params)",
            student.param_count(),
            teacher.param_count()
        )));
    }

    // Both phases train with the softmax at the distillation temperature:
    // the teacher on hard labels (that is what grows its logits enough for
    // the softened outputs to carry class information), the student on the
    // teacher's softened outputs. Softmax gradients shrink by 1/T, so the
    // configured learning rate is interpreted on the temperature-1 scale
    // and multiplied by T for both phases. Convergence has a long warmup
    // at high temperatures; budget epochs accordingly (40+ at T = 20).
    let mut phase_cfg = cfg.teacher_train.clone();
    phase_cfg.learning_rate *= cfg.temperature;

    let teacher_target = |idx: usize| -> Result<Target> { Ok(Target::Hard(data.items[idx].label)) };
    let (teacher, _) = train_loop(
        &teacher,
        data,
        &phase_cfg,
        cfg.temperature,
        &teacher_target,
        None,
    )?;

    let soft_targets: Vec<Vec<f64>> = data
        .items
        .iter()
        .map(|item| {
            teacher
                .forward_probs(&item.pixels, cfg.temperature)
                .map(|p| p.data().to_vec())
        })
        .collect::<Result<_>>()?;

    let target_of = |idx: usize| -> Result<Target> { Ok(Target::Soft(soft_targets[idx].clone())) };
    let (student, _) = train_loop(
        &student,
        data,
        &phase_cfg,
        cfg.temperature,
        &target_of,
        None,
    )?;
    Ok(student)
}

/// Binary classifier that screens inputs before the primary model:
/// class 0 = clean, class 1 = adversarial.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub net: Network,
}

impl Detector {
    /// Probability that `image` is adversarial.
    pub fn score(&self, image: &Tensor) -> Result<f64> {
        Ok(self.net.forward_probs(image, 1.0)?.data()[1])
    }

    /// True if the detector flags `image` as adversarial.
    pub fn flags(&self, image: &Tensor) -> Result<bool> {
        Ok(argmax(&self.net.forward_probs(image, 1.0)?)? == 1)
    }
}

/// Held-out evaluation of a freshly trained detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub holdout_accuracy: f64,
    /// Fraction of held-out clean images misclassified as adversarial.
    pub false_flag_rate: f64,
    pub n_train: usize,
    pub n_holdout: usize,
}

/// Trains a binary detector on balanced clean/adversarial sets and
/// evaluates it on an internal holdout split (20%, disjoint from the
/// training split by construction and asserted).
pub fn train_detector(
    clean: &Dataset,
    adversarial: &Dataset,
    arch: &[LayerSpec],
    cfg: &TrainConfig,
) -> Result<(Detector, DetectorReport)> {
    if clean.len() != adversarial.len() {
        return Err(Error::arg(format!(
            "detector needs balanced sets, got {} clean vs {} adversarial",
            clean.len(),
            adversarial.len()
        )));
    }
    if clean.image_shape() != adversarial.image_shape() {
        return Err(Error::shape(
            clean.image_shape().dims(),
            adversarial.image_shape().dims(),
            "detector input shapes",
        ));
    }
    match arch.last() {
        Some(LayerSpec::Dense { out_features: 2 }) => {}
        _ => return Err(Error::arg("detector architecture must end in dense(2)")),
    }

    let mut items = Vec::with_capacity(2 * clean.len());
    for item in &clean.items {
        items.push(LabeledImage {
            pixels: item.pixels.clone(),
            label: 0,
        });
    }
    for item in &adversarial.items {
        items.push(LabeledImage {
            pixels: item.pixels.clone(),
            label: 1,
        });
    }

    let mut rng = SplitMix64::new(derive_seed(cfg.seed, 0xDE7EC7));
    let mut indices: Vec<usize> = (0..items.len()).collect();
    rng.shuffle(&mut indices);
    let n_holdout = (items.len() / 5).max(1);
    let (holdout_idx, train_idx) = indices.split_at(n_holdout);
    assert!(
        holdout_idx.iter().all(|i| !train_idx.contains(i)),
        "holdout split overlaps training split"
    );

    let class_names = Some(vec!["clean".to_string(), "adversarial".to_string()]);
    let train_items: Vec<LabeledImage> = train_idx.iter().map(|&i| items[i].clone()).collect();
    let train_set = Dataset::new(train_items, 2, class_names)?;

    let net = Network::new(clean.image_shape(), arch.to_vec(), 2, derive_seed(cfg.seed, 1))?;
    let (net, _) = train_sgd(&net, &train_set, cfg)?;
    let detector = Detector { net };

    let mut correct = 0usize;
    let mut clean_total = 0usize;
    let mut false_flags = 0usize;
    for &i in holdout_idx {
        let item = &items[i];
        let flagged = detector.flags(&item.pixels)?;
        if flagged == (item.label == 1) {
            correct += 1;
        }
        if item.label == 0 {
            clean_total += 1;
            if flagged {
                false_flags += 1;
            }
        }
    }

    let report = DetectorReport {
        holdout_accuracy: correct as f64 / holdout_idx.len() as f64,
        false_flag_rate: if clean_total == 0 {
            0.0
        } else {
            false_flags as f64 / clean_total as f64
        },
        n_train: train_idx.len(),
        n_holdout: holdout_idx.len(),
    };
    Ok((detector, report))
}

/// Detector verdicts as CSV: one `image_id,score,verdict` row per image.
pub fn detector_verdicts_csv(detector: &Detector, images: &[Tensor]) -> Result<String> {
    let mut out = String::from("image_id,score,verdict\n");
    for (i, image) in images.iter().enumerate() {
        let score = detector.score(image)?;
        let verdict = if detector.flags(image)? {
            "adversarial"
        } else {
            "clean"
        };
        out.push_str(&format!("{i},{score:.6},{verdict}\n"));
    }
    Ok(out)
}

pub fn write_detector_verdicts_csv(
    detector: &Detector,
    images: &[Tensor],
    path: &Path,
) -> Result<u64> {
    let text = detector_verdicts_csv(detector, images)?;
    std::fs::write(path, text.as_bytes())?;
    Ok(text.len() as u64)
}
