//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use advlab::attacks::{
    self, AttackConfig, AttackMethod, TargetSelection, DEFAULT_ALPHA, DEFAULT_ITERATIONS,
};
use advlab::datasets::{sample_subset, save_idx, Dataset};
use advlab::defenses::{
    adversarial_train, distill, train_detector, AdvTrainConfig, DistillConfig,
    DEFAULT_DISTILL_TEMPERATURE, DEFAULT_MIX_RATIO,
};
use advlab::error::{Error, Result};
use advlab::evaluation::{
    clean_accuracy, render_plot_svg, run_sweep, run_transfer, write_report_csv,
    write_transfer_csv, Metric, SweepConfig, TransferReport, DEFAULT_EPS_GRID,
    DEFAULT_SUBSET_SIZE,
};
use advlab::network::{
    baseline_cnn, compact_cnn, load_checkpoint, save_checkpoint, LayerSpec, Network, TrainConfig,
};
use advlab::rng::derive_seed;

use crate::source;
use crate::{AttackArgs, DefendArgs, GenDataArgs, SweepArgs, TrainArgs, TransferArgs};

const DEFAULT_EPOCHS: usize = 30;
const DEFAULT_LR: f64 = 0.03;
const DEFAULT_BATCH: usize = 32;

/// Overlays non-null flag values onto the JSON config file, if any.
fn merge_config<T: Serialize + DeserializeOwned>(args: T, config: &Option<PathBuf>) -> Result<T> {
    let Some(path) = config else { return Ok(args) };
    let mut merged: Value = serde_json::from_slice(&fs::read(path)?)?;
    if !merged.is_object() {
        return Err(Error::InvalidArgument(format!(
            "config file {} must contain a JSON object",
            path.display()
        )));
    }
    overlay(&mut merged, serde_json::to_value(&args)?);
    Ok(serde_json::from_value(merged)?)
}

fn overlay(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(base_map), Value::Object(over_map)) => {
            for (key, value) in over_map {
                if value.is_null() {
                    continue;
                }
                overlay(base_map.entry(key).or_insert(Value::Null), value);
            }
        }
        (slot, value) => {
            if !value.is_null() {
                *slot = value;
            }
        }
    }
}

fn write_sidecar(primary: &Path, command: &str, resolved: Value) -> Result<()> {
    let path = sidecar_path(primary);
    let doc = json!({ "command": command, "resolved": resolved });
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

fn sidecar_path(primary: &Path) -> PathBuf {
    PathBuf::from(format!("{}.run.json", primary.display()))
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("missing required --{flag}")))
}

fn load_arch(file: &Option<PathBuf>, default: Vec<LayerSpec>) -> Result<Vec<LayerSpec>> {
    match file {
        Some(path) => Ok(serde_json::from_slice(&fs::read(path)?)?),
        None => Ok(default),
    }
}

fn parse_eps_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad epsilon value {s:?}")))
        })
        .collect()
}

fn parse_methods(spec: &str) -> Result<Vec<AttackMethod>> {
    if spec == "all" {
        return Ok(AttackMethod::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| AttackMethod::from_str(s.trim()))
        .collect()
}

fn data_json(src: &source::ResolvedSource) -> Value {
    serde_json::to_value(src).expect("resolved source serializes")
}

pub fn train(args: TrainArgs) -> Result<()> {
    let config_file = args.config.clone();
    let args = merge_config(args, &config_file)?;
    let out = require(args.out, "out")?;
    let (data, src) = source::resolve(&args.data)?;

    let seed = args.seed.unwrap_or(0);
    let cfg = TrainConfig {
        learning_rate: args.lr.unwrap_or(DEFAULT_LR),
        epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS),
        batch_size: args.batch_size.unwrap_or(DEFAULT_BATCH),
        seed,
        grad_norm_limit: args.grad_norm_limit,
        label_smoothing: args.label_smoothing.unwrap_or(0.0),
    };
    let arch = load_arch(&args.arch_file, baseline_cnn(data.class_count))?;
    let net = Network::new(data.image_shape(), arch, data.class_count, derive_seed(seed, 1))?;

    let (trained, history) = advlab::network::train_sgd(&net, &data, &cfg)?;
    for epoch in &history {
        println!(
            "epoch {:>3}  loss {:.4}  train-acc {:.3}",
            epoch.epoch, epoch.mean_loss, epoch.train_accuracy
        );
    }
    let holdout = source::resolve_holdout(&args.data, 200)?;
    println!("held-out accuracy: {:.3}", clean_accuracy(&trained, &holdout)?);

    save_checkpoint(&trained, &out)?;
    println!("checkpoint written to {}", out.display());
    write_sidecar(
        &out,
        "train",
        json!({
            "data": data_json(&src),
            "train": cfg,
            "net_seed": derive_seed(seed, 1),
            "out": out,
        }),
    )
}

pub fn attack(args: AttackArgs) -> Result<()> {
    let config_file = args.config.clone();
    let args = merge_config(args, &config_file)?;
    let model_path = require(args.model, "model")?;
    let out_prefix = require(args.out_prefix, "out-prefix")?;
    let net = load_checkpoint(&model_path)?;
    let (data, src) = source::resolve(&args.data)?;

    let index = args.index.unwrap_or(0);
    if index >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "--index {index} out of range for {} images",
            data.len()
        )));
    }
    let item = &data.items[index];
    let seed = args.seed.unwrap_or(0);

    let method = AttackMethod::from_str(args.method.as_deref().unwrap_or("fgsm"))?;
    let target = match (&args.target, method) {
        (Some(spec), _) if spec == "random" => TargetSelection::Random {
            seed: derive_seed(seed, 2),
        },
        (Some(spec), _) => TargetSelection::Fixed(spec.parse::<usize>().map_err(|_| {
            Error::InvalidArgument(format!("bad --target {spec:?}: expected an index or \"random\""))
        })?),
        (None, AttackMethod::IterativeTargeted) => TargetSelection::Random {
            seed: derive_seed(seed, 2),
        },
        (None, _) => TargetSelection::None,
    };
    let cfg = AttackConfig {
        method,
        epsilon: args.eps.unwrap_or(0.1),
        alpha: args.alpha.unwrap_or(DEFAULT_ALPHA),
        iterations: args.iters.unwrap_or(DEFAULT_ITERATIONS),
        target,
    };
    let outcome = attacks::attack(&net, item, &cfg)?;

    let ext = if item.pixels.shape().dims()[2] == 3 {
        "ppm"
    } else {
        "pgm"
    };
    let clean_path = PathBuf::from(format!("{}-clean.{ext}", out_prefix.display()));
    let adv_path = PathBuf::from(format!("{}-adv.{ext}", out_prefix.display()));
    attacks::write_pnm(&item.pixels, &clean_path)?;
    attacks::write_pnm(&outcome.adversarial, &adv_path)?;

    let record_path = PathBuf::from(format!("{}.json", out_prefix.display()));
    let record = json!({
        "label": item.label,
        "target": outcome.target,
        "clean_probs": outcome.clean_probs.data(),
        "adv_probs": outcome.adv_probs.data(),
        "linf_norm": outcome.linf_norm,
        "iterations_run": outcome.iterations_run,
        "success_flipped_top1": outcome.success_flipped_top1,
        "success_hit_target": outcome.success_hit_target,
    });
    fs::write(&record_path, serde_json::to_string_pretty(&record)?)?;

    println!(
        "{method} eps={} linf={:.6} flipped={} target_hit={:?}",
        cfg.epsilon, outcome.linf_norm, outcome.success_flipped_top1, outcome.success_hit_target
    );
    println!(
        "wrote {}, {}, {}",
        clean_path.display(),
        adv_path.display(),
        record_path.display()
    );
    write_sidecar(
        &record_path,
        "attack",
        json!({
            "model": model_path,
            "data": data_json(&src),
            "index": index,
            "attack": cfg,
            "seed": seed,
            "out_prefix": out_prefix,
        }),
    )
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let config_file = args.config.clone();
    let args = merge_config(args, &config_file)?;
    let model_path = require(args.model, "model")?;
    let out = require(args.out, "out")?;
    let net = load_checkpoint(&model_path)?;
    let (data, src) = source::resolve(&args.data)?;

    let cfg = SweepConfig {
        methods: parse_methods(args.methods.as_deref().unwrap_or("all"))?,
        eps_grid: match &args.eps {
            Some(spec) => parse_eps_list(spec)?,
            None => DEFAULT_EPS_GRID.to_vec(),
        },
        subset_size: args.n.unwrap_or(DEFAULT_SUBSET_SIZE),
        alpha: args.alpha.unwrap_or(DEFAULT_ALPHA),
        iterations: args.iters.unwrap_or(DEFAULT_ITERATIONS),
        seed: args.seed.unwrap_or(0),
        jobs: args.jobs.unwrap_or(1),
    };
    let report = run_sweep(&net, &data, &cfg)?;
    for row in &report.rows {
        println!(
            "{:<10} eps={:.3}  top1_rel={:.3} top5_rel={:.3} top1_gt={:.3} top5_gt={:.3}",
            row.method.name(),
            row.epsilon,
            row.top1_rel,
            row.top5_rel,
            row.top1_gt,
            row.top5_gt
        );
    }

    let bytes = write_report_csv(&report, &out)?;
    let svg_path = args
        .svg
        .unwrap_or_else(|| out.with_extension("svg"));
    let metric = Metric::from_str(args.metric.as_deref().unwrap_or("top1_rel"))?;
    fs::write(&svg_path, render_plot_svg(&report, metric)?)?;
    println!(
        "wrote {} ({bytes} bytes) and {}",
        out.display(),
        svg_path.display()
    );
    write_sidecar(
        &out,
        "sweep",
        json!({
            "model": model_path,
            "data": data_json(&src),
            "sweep": cfg,
            "metric": metric.name(),
            "out": out,
            "svg": svg_path,
        }),
    )
}

pub fn defend(args: DefendArgs) -> Result<()> {
    let config_file = args.config.clone();
    let args = merge_config(args, &config_file)?;
    let mode = require(args.mode.clone(), "mode")?;
    let out = require(args.out.clone(), "out")?;
    let (data, src) = source::resolve(&args.data)?;
    let seed = args.seed.unwrap_or(0);
    let base = TrainConfig {
        learning_rate: args.lr.unwrap_or(DEFAULT_LR),
        epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS),
        batch_size: args.batch_size.unwrap_or(DEFAULT_BATCH),
        seed,
        grad_norm_limit: None,
        label_smoothing: 0.0,
    };

    match mode.as_str() {
        "adv-train" => {
            let method = AttackMethod::from_str(args.attack_method.as_deref().unwrap_or("fgsm"))?;
            let attack = AttackConfig {
                method,
                epsilon: args.eps.unwrap_or(0.1),
                alpha: args.alpha.unwrap_or(DEFAULT_ALPHA),
                iterations: args.iters.unwrap_or(DEFAULT_ITERATIONS),
                target: if method == AttackMethod::IterativeTargeted {
                    TargetSelection::Random {
                        seed: derive_seed(seed, 2),
                    }
                } else {
                    TargetSelection::None
                },
            };
            let cfg = AdvTrainConfig {
                base: base.clone(),
                attack,
                mix_ratio: args.mix_ratio.unwrap_or(DEFAULT_MIX_RATIO),
            };
            let init = Network::new(
                data.image_shape(),
                baseline_cnn(data.class_count),
                data.class_count,
                derive_seed(seed, 1),
            )?;
            let defended = adversarial_train(&init, &data, &cfg)?;
            let holdout = source::resolve_holdout(&args.data, 200)?;
            println!(
                "defended clean accuracy: {:.3}",
                clean_accuracy(&defended, &holdout)?
            );
            save_checkpoint(&defended, &out)?;
            println!("checkpoint written to {}", out.display());
            write_sidecar(
                &out,
                "defend",
                json!({ "mode": mode, "data": data_json(&src), "adv_train": cfg, "out": out }),
            )
        }
        "distill" => {
            let cfg = DistillConfig {
                teacher_layers: baseline_cnn(data.class_count),
                teacher_train: base.clone(),
                student_layers: load_arch(
                    &args.student_arch_file,
                    compact_cnn(data.class_count),
                )?,
                temperature: args.temperature.unwrap_or(DEFAULT_DISTILL_TEMPERATURE),
            };
            let student = distill(&data, &cfg, seed)?;
            let holdout = source::resolve_holdout(&args.data, 200)?;
            println!(
                "student clean accuracy: {:.3}",
                clean_accuracy(&student, &holdout)?
            );
            save_checkpoint(&student, &out)?;
            println!("checkpoint written to {}", out.display());
            write_sidecar(
                &out,
                "defend",
                json!({ "mode": mode, "data": data_json(&src), "distill": cfg, "seed": seed, "out": out }),
            )
        }
        "detector" => {
            let model_path = require(args.model.clone(), "model")?;
            let victim = load_checkpoint(&model_path)?;
            let pool_n = args.pool.unwrap_or(100).min(data.len());
            let clean_pool = sample_subset(&data, pool_n, derive_seed(seed, 3))?;
            let method = AttackMethod::from_str(args.attack_method.as_deref().unwrap_or("fgsm"))?;
            let mut adv_items = Vec::with_capacity(clean_pool.len());
            for (i, item) in clean_pool.items.iter().enumerate() {
                let attack = AttackConfig {
                    method,
                    epsilon: args.eps.unwrap_or(0.1),
                    alpha: args.alpha.unwrap_or(DEFAULT_ALPHA),
                    iterations: args.iters.unwrap_or(DEFAULT_ITERATIONS),
                    target: if method == AttackMethod::IterativeTargeted {
                        TargetSelection::Random {
                            seed: derive_seed(derive_seed(seed, 4), i as u64),
                        }
                    } else {
                        TargetSelection::None
                    },
                };
                let outcome = attacks::attack(&victim, item, &attack)?;
                adv_items.push(advlab::datasets::LabeledImage {
                    pixels: outcome.adversarial,
                    label: item.label,
                });
            }
            let adv_pool = Dataset::new(adv_items, clean_pool.class_count, None)?;
            let (detector, report) =
                train_detector(&clean_pool, &adv_pool, &baseline_cnn(2), &base)?;
            println!(
                "detector holdout accuracy {:.3}, false-flag rate {:.3} ({} train / {} holdout)",
                report.holdout_accuracy, report.false_flag_rate, report.n_train, report.n_holdout
            );
            save_checkpoint(&detector.net, &out)?;
            let report_path = PathBuf::from(format!("{}.report.json", out.display()));
            fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
            let verdicts_path = PathBuf::from(format!("{}.verdicts.csv", out.display()));
            let pool_images: Vec<advlab::tensor::Tensor> = clean_pool
                .items
                .iter()
                .chain(adv_pool.items.iter())
                .map(|item| item.pixels.clone())
                .collect();
            advlab::defenses::write_detector_verdicts_csv(&detector, &pool_images, &verdicts_path)?;
            println!(
                "checkpoint written to {}, report to {}, verdicts to {}",
                out.display(),
                report_path.display(),
                verdicts_path.display()
            );
            write_sidecar(
                &out,
                "defend",
                json!({
                    "mode": mode,
                    "model": model_path,
                    "data": data_json(&src),
                    "train": base,
                    "pool": pool_n,
                    "attack_method": method.name(),
                    "eps": args.eps.unwrap_or(0.1),
                    "seed": seed,
                    "out": out,
                }),
            )
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown --mode {other:?} (expected adv-train, distill, or detector)"
        ))),
    }
}

pub fn transfer(args: TransferArgs) -> Result<()> {
    let config_file = args.config.clone();
    let args = merge_config(args, &config_file)?;
    let source_path = require(args.source, "source")?;
    let target_path = require(args.target, "target")?;
    let out = require(args.out, "out")?;
    let source_net = load_checkpoint(&source_path)?;
    let target_net = load_checkpoint(&target_path)?;
    let (data, src) = source::resolve(&args.data)?;

    let seed = args.seed.unwrap_or(0);
    let n = args.n.unwrap_or(DEFAULT_SUBSET_SIZE).min(data.len());
    let subset = sample_subset(&data, n, derive_seed(seed, 4))?;
    let method = AttackMethod::from_str(args.method.as_deref().unwrap_or("fgsm"))?;
    let eps_list = match &args.eps {
        Some(spec) => parse_eps_list(spec)?,
        None => vec![0.1],
    };

    let source_id = model_id(&source_path);
    let target_id = model_id(&target_path);
    let mut reports = Vec::new();
    for (i, &epsilon) in eps_list.iter().enumerate() {
        let cfg = AttackConfig {
            method,
            epsilon,
            alpha: args.alpha.unwrap_or(DEFAULT_ALPHA),
            iterations: args.iters.unwrap_or(DEFAULT_ITERATIONS),
            target: if method == AttackMethod::IterativeTargeted {
                TargetSelection::Random {
                    seed: derive_seed(seed, 5),
                }
            } else {
                TargetSelection::None
            },
        };
        reports.push(run_transfer(
            &source_net,
            &target_net,
            &cfg,
            &subset,
            derive_seed(seed, 100 + i as u64),
            &source_id,
            &target_id,
        )?);
    }
    let report = TransferReport::merge(reports);
    for row in &report.rows {
        println!(
            "{} -> {} ({}) eps={:.3}: transfer top1_rel {:.3}, noise control {:.3}",
            row.source_model_id,
            row.target_model_id,
            row.method.name(),
            row.epsilon,
            row.transfer_top1_rel,
            row.noise_control_top1_rel
        );
    }
    let bytes = write_transfer_csv(&report, &out)?;
    println!("wrote {} ({bytes} bytes)", out.display());
    write_sidecar(
        &out,
        "transfer",
        json!({
            "source": source_path,
            "target": target_path,
            "data": data_json(&src),
            "method": method.name(),
            "eps": eps_list,
            "n": n,
            "seed": seed,
            "out": out,
        }),
    )
}

pub fn gen_data(args: GenDataArgs) -> Result<()> {
    let config_file = args.config.clone();
    let args = merge_config(args, &config_file)?;
    let out_dir = require(args.out_dir, "out-dir")?;
    let n = args.n.unwrap_or(source::DEFAULT_SYNTHETIC_N);
    let size = args.size.unwrap_or(source::DEFAULT_SIZE);
    let classes = args.classes.unwrap_or(source::DEFAULT_CLASSES);
    let seed = args.seed.unwrap_or(source::DEFAULT_DATA_SEED);

    let data = advlab::datasets::generate_synthetic(n, size, classes, seed)?;
    fs::create_dir_all(&out_dir)?;
    let images = out_dir.join("images-idx3-ubyte");
    let labels = out_dir.join("labels-idx1-ubyte");
    save_idx(&data, &images, &labels)?;
    println!("wrote {} and {}", images.display(), labels.display());
    write_sidecar(
        &out_dir.join("gen-data"),
        "gen-data",
        json!({ "n": n, "size": size, "classes": classes, "seed": seed, "out_dir": out_dir }),
    )
}

fn model_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
