//! The experimental harness: epsilon sweeps over the attack methods,
//! relative and ground-truth top-k metrics, transferability runs, and
//! report emission (CSV and SVG).

mod plot;
mod report;

pub use plot::{render_plot_svg, Metric, PLOT_AREA};
pub use report::{
    parse_sweep_csv, sweep_csv_string, transfer_csv_string, write_report_csv, write_transfer_csv,
};

use serde::{Deserialize, Serialize};

use crate::attacks::{self, AttackConfig, AttackMethod, TargetSelection};
use crate::datasets::{sample_subset, Dataset};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{argmax, top_k, Tensor};

/// Default epsilon grid; brackets the figure-caption budgets at desk scale.
pub const DEFAULT_EPS_GRID: [f64; 5] = [0.0, 0.01, 0.02, 0.05, 0.1];

/// Default number of images drawn per sweep.
pub const DEFAULT_SUBSET_SIZE: usize = 20;

/// Sweep parameterization: which methods, which epsilons, how many images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<AttackMethod>,
    /// Strictly ascending, non-negative.
    pub eps_grid: Vec<f64>,
    pub subset_size: usize,
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Worker threads for per-image attack generation; never changes
    /// results, only wall-clock time.
    pub jobs: usize,
}

impl SweepConfig {
    /// All three methods over the default grid with n = 20.
    pub fn new(seed: u64) -> SweepConfig {
        SweepConfig {
            methods: AttackMethod::ALL.to_vec(),
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            subset_size: DEFAULT_SUBSET_SIZE,
            alpha: attacks::DEFAULT_ALPHA,
            iterations: attacks::DEFAULT_ITERATIONS,
            seed,
            jobs: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::arg("sweep needs at least one method"));
        }
        if self.eps_grid.is_empty() {
            return Err(Error::arg("sweep needs at least one epsilon"));
        }
        for pair in self.eps_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::arg(format!(
                    "eps_grid must be strictly ascending, got {:?}",
                    self.eps_grid
                )));
            }
        }
        if self.eps_grid[0] < 0.0 {
            return Err(Error::arg("epsilons must be non-negative"));
        }
        if self.subset_size == 0 {
            return Err(Error::arg("subset_size must be at least 1"));
        }
        Ok(())
    }
}

/// One sweep cell: a (method, epsilon) pair with its accuracy metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: AttackMethod,
    pub epsilon: f64,
    pub n_samples: usize,
    /// Fraction whose clean top-1 prediction survives as the adversarial
    /// top-1 / within the adversarial top-5.
    pub top1_rel: f64,
    pub top5_rel: f64,
    /// Fraction whose TRUE label survives as top-1 / within top-5.
    pub top1_gt: f64,
    pub top5_gt: f64,
    pub mean_linf: f64,
    pub mean_iterations: f64,
    pub seed: u64,
}

/// Rows for every (method, epsilon) pair of one sweep, method-major.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// One transferability measurement at a single epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub source_model_id: String,
    pub target_model_id: String,
    pub method: AttackMethod,
    pub epsilon: f64,
    /// Relative top-1 accuracy of the target on adversarial images
    /// generated against the source.
    pub transfer_top1_rel: f64,
    /// Same metric for the uniform +/- epsilon noise control.
    pub noise_control_top1_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
}

impl TransferReport {
    pub fn merge(reports: impl IntoIterator<Item = TransferReport>) -> TransferReport {
        TransferReport {
            rows: reports.into_iter().flat_map(|r| r.rows).collect(),
        }
    }
}

/// Fraction of image pairs whose clean top-1 prediction appears within the
/// model's k top predictions for the paired adversarial image.
pub fn relative_topk_accuracy(
    net: &Network,
    clean: &[Tensor],
    adversarial: &[Tensor],
    k: usize,
) -> Result<f64> {
    if clean.len() != adversarial.len() {
        return Err(Error::arg(format!(
            "{} clean images vs {} adversarial images",
            clean.len(),
            adversarial.len()
        )));
    }
    if clean.is_empty() {
        return Err(Error::arg("relative accuracy of an empty list is undefined"));
    }
    let mut hits = 0usize;
    for (c, a) in clean.iter().zip(adversarial) {
        let clean_top = argmax(&net.forward_probs(c, 1.0)?)?;
        let adv_top = top_k(&net.forward_probs(a, 1.0)?, k)?;
        if adv_top.contains(&clean_top) {
            hits += 1;
        }
    }
    Ok(hits as f64 / clean.len() as f64)
}

/// Top-1 accuracy against ground-truth labels.
pub fn clean_accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    let mut hits = 0usize;
    for item in &data.items {
        if argmax(&net.forward_probs(&item.pixels, 1.0)?)? == item.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Ground-truth top-1 accuracy on adversarial versions of `data`, with
/// attacks generated against `net` itself. Random targets derive
/// per-image streams from the config's own target seed.
pub fn accuracy_under_attack(net: &Network, data: &Dataset, cfg: &AttackConfig) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::arg("accuracy of an empty dataset is undefined"));
    }
    let target_stream = match cfg.target {
        TargetSelection::Random { seed } => derive_seed(seed, 0x7A26E7),
        _ => 0,
    };
    let mut hits = 0usize;
    for (i, item) in data.items.iter().enumerate() {
        let per_item = per_image_config(cfg, derive_seed(target_stream, i as u64));
        let outcome = attacks::attack(net, item, &per_item)?;
        if argmax(&outcome.adv_probs)? == item.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

fn per_image_config(template: &AttackConfig, target_seed: u64) -> AttackConfig {
    let mut cfg = *template;
    if let TargetSelection::Random { .. } = cfg.target {
        cfg.target = TargetSelection::Random { seed: target_seed };
    }
    cfg
}

/// Runs the full protocol: one seeded subset, every configured method at
/// every epsilon, relative and ground-truth top-1/top-5 metrics per cell
/// (top-5 is capped at the class count for small label spaces).
///
/// Targeted cells draw a fresh random target per image and per epsilon
/// from the sweep seed stream.
pub fn run_sweep(net: &Network, data: &Dataset, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let subset = sample_subset(data, cfg.subset_size, cfg.seed)?;
    let k5 = 5.min(net.class_count());
    let target_stream = derive_seed(cfg.seed, 0x7A26E7);

    let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.eps_grid.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (ei, &epsilon) in cfg.eps_grid.iter().enumerate() {
            let outcomes = crate::parallel::map_results(cfg.jobs, &subset.items, |i, item| {
                let mut attack_cfg = AttackConfig {
                    method,
                    epsilon,
                    alpha: cfg.alpha,
                    iterations: cfg.iterations,
                    target: TargetSelection::None,
                };
                if method == AttackMethod::IterativeTargeted {
                    let tag = ((mi * cfg.eps_grid.len() + ei) * subset.len() + i) as u64;
                    attack_cfg.target = TargetSelection::Random {
                        seed: derive_seed(target_stream, tag),
                    };
                }
                attacks::attack(net, item, &attack_cfg)
            })?;

            let n = outcomes.len();
            let mut top1_rel = 0usize;
            let mut top5_rel = 0usize;
            let mut top1_gt = 0usize;
            let mut top5_gt = 0usize;
            let mut linf_sum = 0.0;
            let mut iter_sum = 0.0;
            for (item, outcome) in subset.items.iter().zip(&outcomes) {
                let clean_top = argmax(&outcome.clean_probs)?;
                let adv_top5 = top_k(&outcome.adv_probs, k5)?;
                let adv_top1 = adv_top5[0];
                if adv_top1 == clean_top {
                    top1_rel += 1;
                }
                if adv_top5.contains(&clean_top) {
                    top5_rel += 1;
                }
                if adv_top1 == item.label {
                    top1_gt += 1;
                }
                if adv_top5.contains(&item.label) {
                    top5_gt += 1;
                }
                linf_sum += outcome.linf_norm;
                iter_sum += outcome.iterations_run as f64;
            }
            rows.push(SweepRow {
                method,
                epsilon,
                n_samples: n,
                top1_rel: top1_rel as f64 / n as f64,
                top5_rel: top5_rel as f64 / n as f64,
                top1_gt: top1_gt as f64 / n as f64,
                top5_gt: top5_gt as f64 / n as f64,
                mean_linf: linf_sum / n as f64,
                mean_iterations: iter_sum / n as f64,
                seed: cfg.seed,
            });
        }
    }
    Ok(SweepReport { rows })
}

/// Generates adversarial images against `source`, measures how far they
/// degrade `target`'s relative top-1 accuracy, and runs a uniform
/// +/- epsilon noise control with the same budget.
pub fn run_transfer(
    source: &Network,
    target: &Network,
    attack_cfg: &AttackConfig,
    data: &Dataset,
    seed: u64,
    source_id: &str,
    target_id: &str,
) -> Result<TransferReport> {
    if data.is_empty() {
        return Err(Error::arg("transfer run needs a non-empty dataset"));
    }
    let target_stream = derive_seed(seed, 0x7A26E7);
    let noise_stream = derive_seed(seed, 0x905E);
    let mut transfer_hits = 0usize;
    let mut noise_hits = 0usize;
    for (i, item) in data.items.iter().enumerate() {
        let per_item = per_image_config(attack_cfg, derive_seed(target_stream, i as u64));
        let outcome = attacks::attack(source, item, &per_item)?;

        let clean_top = argmax(&target.forward_probs(&item.pixels, 1.0)?)?;
        let adv_top = argmax(&target.forward_probs(&outcome.adversarial, 1.0)?)?;
        if adv_top == clean_top {
            transfer_hits += 1;
        }

        let noisy = uniform_noise_within_ball(
            &item.pixels,
            attack_cfg.epsilon,
            derive_seed(noise_stream, i as u64),
        )?;
        let noise_top = argmax(&target.forward_probs(&noisy, 1.0)?)?;
        if noise_top == clean_top {
            noise_hits += 1;
        }
    }
    let n = data.len() as f64;
    Ok(TransferReport {
        rows: vec![TransferRow {
            source_model_id: source_id.to_string(),
            target_model_id: target_id.to_string(),
            method: attack_cfg.method,
            epsilon: attack_cfg.epsilon,
            transfer_top1_rel: transfer_hits as f64 / n,
            noise_control_top1_rel: noise_hits as f64 / n,
        }],
    })
}

/// Adds seeded uniform noise in [-epsilon, epsilon] per pixel, then clips
/// into the valid-image epsilon ball (the same L-inf budget the attacks get).
fn uniform_noise_within_ball(image: &Tensor, epsilon: f64, seed: u64) -> Result<Tensor> {
    let mut rng = SplitMix64::new(seed);
    let data: Vec<f64> = image
        .data()
        .iter()
        .map(|&v| v + rng.uniform(-epsilon, epsilon))
        .collect();
    let noisy = Tensor::new(image.shape().clone(), data)?;
    attacks::epsilon_clamp(&noisy, image, epsilon)
}
