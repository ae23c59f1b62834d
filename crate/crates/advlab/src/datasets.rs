//! Data ingestion: IDX files, a procedural synthetic corpus, and seeded
//! subsetting.
//!
//! All pixels live in [0, 1]. The synthetic generator is the default test
//! bed; IDX (MNIST-style) files are a drop-in so nothing here ever needs
//! network access.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Shape, Tensor};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// One image with its class label. Pixel tensor is (height, width, channels).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Tensor,
    pub label: usize,
}

/// A labeled image collection with a fixed class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<LabeledImage>,
    pub class_count: usize,
    pub class_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, checking the shared-shape, label-range, and
    /// pixel-range invariants.
    pub fn new(
        items: Vec<LabeledImage>,
        class_count: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Dataset> {
        if items.is_empty() {
            return Err(Error::arg("dataset must not be empty"));
        }
        if class_count == 0 {
            return Err(Error::arg("class_count must be positive"));
        }
        let shape = items[0].pixels.shape().clone();
        for (i, item) in items.iter().enumerate() {
            if item.pixels.shape() != &shape {
                return Err(Error::shape(
                    shape.dims(),
                    item.pixels.shape().dims(),
                    "dataset image shapes must agree",
                ));
            }
            if item.label >= class_count {
                return Err(Error::arg(format!(
                    "item {i} has label {} but class_count is {class_count}",
                    item.label
                )));
            }
            if item.pixels.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::arg(format!("item {i} has pixels outside [0, 1]")));
            }
        }
        if let Some(names) = &class_names {
            if names.len() != class_count {
                return Err(Error::arg(format!(
                    "{} class names for {class_count} classes",
                    names.len()
                )));
            }
        }
        Ok(Dataset {
            items,
            class_count,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Shape shared by every image in the set.
    pub fn image_shape(&self) -> &Shape {
        self.items[0].pixels.shape()
    }
}

/// Loads an IDX image/label file pair (the MNIST container format).
///
/// u8 pixels are mapped to [0, 1] by dividing by 255. The class count is
/// the largest label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images_bytes = fs::read(images_path)?;
    let labels_bytes = fs::read(labels_path)?;

    let mut img = IdxCursor::new(&images_bytes, images_path);
    let magic = img.read_u32()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: images_path.to_path_buf(),
            expected: IMAGES_MAGIC,
            actual: magic,
        });
    }
    let count = img.read_u32()? as usize;
    let rows = img.read_u32()? as usize;
    let cols = img.read_u32()? as usize;
    let pixels = img.read_bytes(count * rows * cols)?;

    let mut lbl = IdxCursor::new(&labels_bytes, labels_path);
    let magic = lbl.read_u32()?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: labels_path.to_path_buf(),
            expected: LABELS_MAGIC,
            actual: magic,
        });
    }
    let label_count = lbl.read_u32()? as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let labels = lbl.read_bytes(label_count)?;

    if count == 0 {
        return Err(Error::arg("IDX files contain zero images"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::arg("IDX image dimensions must be positive"));
    }

    let shape = Shape::new(vec![rows, cols, 1])?;
    let mut items = Vec::with_capacity(count);
    for (i, &label) in labels.iter().enumerate() {
        let start = i * rows * cols;
        let data: Vec<f64> = pixels[start..start + rows * cols]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
            .collect();
        items.push(LabeledImage {
            pixels: Tensor::new(shape.clone(), data)?,
            label: label as usize,
        });
    }
    let class_count = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    Dataset::new(items, class_count, None)
}

/// Writes a dataset back out as an IDX image/label file pair.
///
/// Pixels are quantized with round(255 * v), so a dataset that came from
/// `load_idx` round-trips exactly.
pub fn save_idx(data: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let dims = data.image_shape().dims();
    if dims.len() != 3 || dims[2] != 1 {
        return Err(Error::arg(format!(
            "IDX export needs single-channel (h, w, 1) images, got shape {:?}",
            dims
        )));
    }
    let (rows, cols) = (dims[0], dims[1]);

    let mut images = Vec::with_capacity(16 + data.len() * rows * cols);
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(data.len() as u32).to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    for item in &data.items {
        for &v in item.pixels.data() {
            images.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }

    let mut labels = Vec::with_capacity(8 + data.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(data.len() as u32).to_be_bytes());
    for item in &data.items {
        if item.label > u8::MAX as usize {
            return Err(Error::arg(format!(
                "label {} does not fit an IDX u8 label",
                item.label
            )));
        }
        labels.push(item.label as u8);
    }

    fs::write(images_path, images)?;
    fs::write(labels_path, labels)?;
    Ok(())
}

struct IdxCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> IdxCursor<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        IdxCursor { bytes, pos: 0, path }
    }

    fn read_u32(&mut self) -> Result<u32> {
        let chunk = self.read_bytes(4)?;
        Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
    }

    fn read_bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| Error::arg("IDX size overflow"))?;
        if end > self.bytes.len() {
            return Err(Error::TruncatedFile {
                path: self.path.to_path_buf(),
                needed: end,
                got: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

/// Number of distinct patterns the synthetic generator knows.
pub const SYNTHETIC_PATTERN_COUNT: usize = 10;

const SYNTHETIC_CLASS_NAMES: [&str; SYNTHETIC_PATTERN_COUNT] = [
    "hbar-top",
    "hbar-bottom",
    "vbar-left",
    "vbar-right",
    "cross",
    "disk-center",
    "ring",
    "checker-fine",
    "checker-coarse",
    "disk-corner",
];

// Contrast and noise levels for the procedural patterns.
const BACKGROUND: f64 = 0.35;
const AMPLITUDE: f64 = 0.16;
const NOISE: f64 = 0.05;

// Each class also carries a faint class-coherent block texture at the
// noise amplitude. Like the micro-textures of natural images it is a
// perfectly predictive but brittle cue: plain training latches onto it,
// which is what makes small-budget attacks bite, while the stronger
// geometric patterns stay available to robust training.
const TEXTURE_BLOCK: usize = 4;
const TEXTURE_AMPLITUDE: f64 = 0.05;
const TEXTURE_STREAM: u64 = 0x7E87;

/// Generates `n` labeled images of `size` x `size` x 1 pixels over
/// `class_count` procedural pattern classes (bars, crosses, disks, rings,
/// checkers at class-dependent positions), each overlaid with the class's
/// faint block texture and per-pixel noise.
///
/// Labels are assigned round-robin; everything is deterministic in `seed`.
pub fn generate_synthetic(
    n: usize,
    size: usize,
    class_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if class_count == 0 || class_count > SYNTHETIC_PATTERN_COUNT {
        return Err(Error::arg(format!(
            "synthetic class_count must be in 1..={SYNTHETIC_PATTERN_COUNT}, got {class_count}"
        )));
    }
    if n < class_count {
        return Err(Error::arg(format!(
            "need at least one sample per class: n={n} < class_count={class_count}"
        )));
    }
    if size < 8 {
        return Err(Error::arg(format!("size must be at least 8, got {size}")));
    }

    let mut rng = SplitMix64::new(seed);
    let shape = Shape::new(vec![size, size, 1])?;
    let textures: Vec<Vec<f64>> = (0..class_count).map(|c| class_texture(c, size)).collect();
    let mut items = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % class_count;
        let pixels = render_pattern(label, size, &textures[label], &mut rng);
        items.push(LabeledImage {
            pixels: Tensor::new(shape.clone(), pixels)?,
            label,
        });
    }
    let names = SYNTHETIC_CLASS_NAMES[..class_count]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Dataset::new(items, class_count, Some(names))
}

/// Per-block signed texture offsets for one class. The stream depends only
/// on the class index, so independently generated datasets (train vs test)
/// agree on every class's texture.
fn class_texture(class: usize, size: usize) -> Vec<f64> {
    let blocks = size.div_ceil(TEXTURE_BLOCK);
    let mut rng = SplitMix64::new(crate::rng::derive_seed(TEXTURE_STREAM, class as u64));
    (0..blocks * blocks)
        .map(|_| {
            if rng.next_u64() & 1 == 1 {
                TEXTURE_AMPLITUDE
            } else {
                -TEXTURE_AMPLITUDE
            }
        })
        .collect()
}

fn render_pattern(class: usize, size: usize, texture: &[f64], rng: &mut SplitMix64) -> Vec<f64> {
    let s = size as i64;
    let jitter_range = (size / 5).max(1) as i64;
    let jy = rng.below((2 * jitter_range + 1) as usize) as i64 - jitter_range;
    let jx = rng.below((2 * jitter_range + 1) as usize) as i64 - jitter_range;
    // Per-instance contrast sign: the shape appears brighter or darker than
    // the background with equal probability, so only its geometry (not its
    // mean intensity) identifies the class.
    let contrast = if rng.next_u64() & 1 == 1 {
        AMPLITUDE
    } else {
        -AMPLITUDE
    };
    let thickness = (s / 9).max(1);

    let on = |y: i64, x: i64| -> bool {
        match class {
            // horizontal / vertical bars at quarter positions
            0 => (y - (s / 4 + jy)).abs() <= thickness / 2,
            1 => (y - (3 * s / 4 + jy)).abs() <= thickness / 2,
            2 => (x - (s / 4 + jx)).abs() <= thickness / 2,
            3 => (x - (3 * s / 4 + jx)).abs() <= thickness / 2,
            // full-span cross through the (jittered) center
            4 => {
                (y - (s / 2 + jy)).abs() <= thickness / 2
                    || (x - (s / 2 + jx)).abs() <= thickness / 2
            }
            // filled disk / ring around the center
            5 => dist2(y, x, s / 2 + jy, s / 2 + jx) <= (s / 5) * (s / 5),
            6 => {
                let d2 = dist2(y, x, s / 2 + jy, s / 2 + jx);
                d2 <= (s / 3) * (s / 3) && d2 > (s / 5) * (s / 5)
            }
            // checkerboards at two cell sizes (phase shifts with jitter)
            7 => {
                let cell = (s / 9).max(2);
                ((y + jy).div_euclid(cell) + (x + jx).div_euclid(cell)) % 2 == 0
            }
            8 => {
                let cell = (s / 5).max(3);
                ((y + jy).div_euclid(cell) + (x + jx).div_euclid(cell)) % 2 == 0
            }
            // corner disk
            9 => dist2(y, x, 3 * s / 4 + jy, s / 4 + jx) <= (s / 5) * (s / 5),
            _ => unreachable!("class bounded by SYNTHETIC_PATTERN_COUNT"),
        }
    };

    let blocks = size.div_ceil(TEXTURE_BLOCK);
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..s {
        for x in 0..s {
            let base = if on(y, x) {
                BACKGROUND + contrast
            } else {
                BACKGROUND
            };
            let tex = texture
                [(y as usize / TEXTURE_BLOCK) * blocks + x as usize / TEXTURE_BLOCK];
            let v = base + tex + rng.uniform(-NOISE, NOISE);
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    pixels
}

fn dist2(y: i64, x: i64, cy: i64, cx: i64) -> i64 {
    (y - cy) * (y - cy) + (x - cx) * (x - cx)
}

/// Draws `n` items without replacement, deterministically in `seed`.
pub fn sample_subset(data: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::arg("subset size must be positive"));
    }
    if n > data.len() {
        return Err(Error::arg(format!(
            "subset size {n} exceeds dataset size {}",
            data.len()
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    // Partial Fisher-Yates: the first n slots become the draw, in draw order.
    for i in 0..n {
        let j = i + rng.below(data.len() - i);
        indices.swap(i, j);
    }
    let items = indices[..n]
        .iter()
        .map(|&i| data.items[i].clone())
        .collect();
    Dataset::new(items, data.class_count, data.class_names.clone())
}
