//! Dataset resolution shared by the subcommands: explicit IDX files, an
//! IDX directory, or the synthetic generator.

use std::path::{Path, PathBuf};

use advlab::datasets::{generate_synthetic, load_idx, Dataset};
use advlab::error::{Error, Result};

use crate::DataArgs;

pub const DEFAULT_SYNTHETIC_N: usize = 600;
pub const DEFAULT_SIZE: usize = 28;
pub const DEFAULT_CLASSES: usize = 10;
pub const DEFAULT_DATA_SEED: u64 = 42;

const DIR_CANDIDATES: [(&str, &str); 4] = [
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ("t10k-images.idx3-ubyte", "t10k-labels.idx1-ubyte"),
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("images-idx3-ubyte", "labels-idx1-ubyte"),
];

/// How a dataset was resolved; recorded in the run sidecar.
#[derive(Debug, serde::Serialize)]
pub struct ResolvedSource {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub synthetic_n: Option<usize>,
    pub size: Option<usize>,
    pub classes: Option<usize>,
    pub data_seed: Option<u64>,
}

pub fn resolve(args: &DataArgs) -> Result<(Dataset, ResolvedSource)> {
    match (&args.images, &args.labels) {
        (Some(images), Some(labels)) => {
            let data = load_idx(images, labels)?;
            return Ok((data, idx_source(images, labels)));
        }
        (Some(_), None) | (None, Some(_)) => {
            return Err(Error::InvalidArgument(
                "--images and --labels must be given together".into(),
            ));
        }
        (None, None) => {}
    }

    if let Some(dir) = &args.data_dir {
        let (images, labels) = find_idx_pair(dir)?;
        let data = load_idx(&images, &labels)?;
        return Ok((data, idx_source(&images, &labels)));
    }

    let n = args.synthetic_n.unwrap_or(DEFAULT_SYNTHETIC_N);
    let size = args.size.unwrap_or(DEFAULT_SIZE);
    let classes = args.classes.unwrap_or(DEFAULT_CLASSES);
    let seed = args.data_seed.unwrap_or(DEFAULT_DATA_SEED);
    let data = generate_synthetic(n, size, classes, seed)?;
    Ok((
        data,
        ResolvedSource {
            images: None,
            labels: None,
            synthetic_n: Some(n),
            size: Some(size),
            classes: Some(classes),
            data_seed: Some(seed),
        },
    ))
}

/// A companion held-out split: the next synthetic seed, or the same IDX
/// data when files were given (callers note this in their output).
pub fn resolve_holdout(args: &DataArgs, n: usize) -> Result<Dataset> {
    if args.images.is_some() || args.data_dir.is_some() {
        let (data, _) = resolve(args)?;
        return Ok(data);
    }
    let size = args.size.unwrap_or(DEFAULT_SIZE);
    let classes = args.classes.unwrap_or(DEFAULT_CLASSES);
    let seed = args.data_seed.unwrap_or(DEFAULT_DATA_SEED);
    generate_synthetic(n, size, classes, seed + 1)
}

fn idx_source(images: &Path, labels: &Path) -> ResolvedSource {
    ResolvedSource {
        images: Some(images.to_path_buf()),
        labels: Some(labels.to_path_buf()),
        synthetic_n: None,
        size: None,
        classes: None,
        data_seed: None,
    }
}

fn find_idx_pair(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    for (img, lbl) in DIR_CANDIDATES {
        let (ip, lp) = (dir.join(img), dir.join(lbl));
        if ip.is_file() && lp.is_file() {
            return Ok((ip, lp));
        }
    }
    Err(Error::InvalidArgument(format!(
        "no IDX image/label pair found in {}",
        dir.display()
    )))
}
