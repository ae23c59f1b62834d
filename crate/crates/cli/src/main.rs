//! `advlab`: train, attack, defend, and evaluate a small image classifier.
//!
//! Exit codes: 0 on success, 1 on runtime failure (message on stderr),
//! 2 on usage errors (clap prints usage). Every run writes a `.run.json`
//! sidecar next to its primary output recording the fully resolved
//! configuration and seeds.

mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "advlab", version, about = "Desk-scale adversarial robustness lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier and write a JSON checkpoint.
    Train(TrainArgs),
    /// Attack a single image and export before/after images plus a
    /// prediction record.
    Attack(AttackArgs),
    /// Run the epsilon sweep and emit a CSV report and SVG plot.
    Sweep(SweepArgs),
    /// Train a defended model (adversarial training, distillation, or an
    /// adversarial-input detector).
    Defend(DefendArgs),
    /// Generate adversarial examples on a source model and measure them
    /// against a target model, with a noise control.
    Transfer(TransferArgs),
    /// Write a synthetic dataset as IDX image/label files.
    GenData(GenDataArgs),
}

/// Where images come from. IDX files win over a data directory, which wins
/// over the synthetic generator.
#[derive(Args, Clone, serde::Serialize, serde::Deserialize, Default)]
pub struct DataArgs {
    /// IDX images file.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// IDX labels file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Directory holding an IDX pair (t10k-*, train-*, or images-*).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Synthetic dataset size (used when no IDX source is given).
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    /// Synthetic image side length.
    #[arg(long)]
    pub size: Option<usize>,
    /// Synthetic class count.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Seed for the synthetic generator (kept separate from --seed so the
    /// corpus is stable across runs).
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Default)]
struct TrainArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on each batch's global parameter-gradient L2 norm.
    #[arg(long)]
    grad_norm_limit: Option<f64>,
    /// Label smoothing mass in [0, 1).
    #[arg(long)]
    label_smoothing: Option<f64>,
    /// JSON file with a layer list; defaults to the baseline CNN.
    #[arg(long)]
    arch_file: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Default)]
struct AttackArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Model checkpoint to attack.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Index of the image to attack.
    #[arg(long)]
    index: Option<usize>,
    /// fgsm, iterative, or targeted.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Target class for the targeted method: an index, or "random".
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Prefix for -clean/-adv image files and the prediction record.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Default)]
struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Comma-separated ascending epsilon list.
    #[arg(long)]
    eps: Option<String>,
    /// "all" or a comma-separated subset of fgsm,iterative,targeted.
    #[arg(long)]
    methods: Option<String>,
    /// Images per sweep subset.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (never changes results).
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV output path; the SVG lands next to it unless --svg is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Metric plotted: top1_rel, top5_rel, top1_gt, or top5_gt.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Default)]
struct DefendArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// adv-train, distill, or detector.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Attack used during adversarial training / for detector data.
    #[arg(long)]
    attack_method: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Fraction of each batch replaced by adversarial examples (adv-train).
    #[arg(long)]
    mix_ratio: Option<f64>,
    /// Distillation temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Student architecture JSON (distill); defaults to the compact CNN.
    #[arg(long)]
    student_arch_file: Option<PathBuf>,
    /// Victim model checkpoint (detector).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Images drawn for the detector's clean/adversarial pools.
    #[arg(long)]
    pool: Option<usize>,
    /// Checkpoint output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Default)]
struct TransferArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Checkpoint attacks are generated against.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Checkpoint the adversarial images are evaluated on.
    #[arg(long)]
    target: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated epsilon list (one report row each).
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Images drawn from the dataset.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Default)]
struct GenDataArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving images-idx3-ubyte and labels-idx1-ubyte.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Attack(args) => commands::attack(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Defend(args) => commands::defend(args),
        Command::Transfer(args) => commands::transfer(args),
        Command::GenData(args) => commands::gen_data(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
