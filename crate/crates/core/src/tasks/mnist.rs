//! IDX ingestion, resize/quantize preprocessing and class-split image tasks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, TaskDataset, TaskKind, Targets};
use crate::matrix::Matrix;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

/// Two classes per task: {1,2}, {3,4}, {5,6}, {7,8}, {9,0}.
pub const MNIST_CLASS_PLAN: [[u8; 2]; 5] = [[1, 2], [3, 4], [5, 6], [7, 8], [9, 0]];

#[derive(Debug, Clone, PartialEq)]
pub struct RawImages {
    pub height: usize,
    pub width: usize,
    /// `count × height × width` bytes, row-major per image.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawImages {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn format_err(file: &str, field: &'static str, message: impl Into<String>) -> DataError {
    DataError::Format {
        file: file.to_string(),
        field,
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize, file: &str, field: &'static str) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(file, field, "header truncated"))
}

/// Parses an IDX3 image file: returns `(count, height, width, pixels)`.
pub fn parse_idx_images(bytes: &[u8], file: &str) -> Result<(usize, usize, usize, Vec<u8>), DataError> {
    let magic = be_u32(bytes, 0, file, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(format_err(file, "magic", format!("expected {IMAGE_MAGIC}, found {magic}")));
    }
    let count = be_u32(bytes, 4, file, "image count")? as usize;
    let height = be_u32(bytes, 8, file, "row count")? as usize;
    let width = be_u32(bytes, 12, file, "column count")? as usize;
    if height == 0 || width == 0 {
        return Err(format_err(file, "dimensions", format!("{height}×{width}")));
    }
    let need = count
        .checked_mul(height * width)
        .ok_or_else(|| format_err(file, "image count", "overflows"))?;
    let payload = &bytes[16..];
    if payload.len() != need {
        return Err(format_err(
            file,
            "payload",
            format!("expected {need} pixel bytes, found {}", payload.len()),
        ));
    }
    Ok((count, height, width, payload.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8], file: &str) -> Result<Vec<u8>, DataError> {
    let magic = be_u32(bytes, 0, file, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(format_err(file, "magic", format!("expected {LABEL_MAGIC}, found {magic}")));
    }
    let count = be_u32(bytes, 4, file, "label count")? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(format_err(
            file,
            "payload",
            format!("expected {count} label bytes, found {}", payload.len()),
        ));
    }
    if let Some(bad) = payload.iter().find(|&&l| l > 9) {
        return Err(format_err(file, "label", format!("value {bad} outside 0..=9")));
    }
    Ok(payload.to_vec())
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<RawImages, DataError> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|e| DataError::Io {
            path: p.display().to_string(),
            source: e,
        })
    };
    let img_name = images_path.display().to_string();
    let (count, height, width, pixels) = parse_idx_images(&read(images_path)?, &img_name)?;
    let labels = parse_idx_labels(&read(labels_path)?, &labels_path.display().to_string())?;
    if labels.len() != count {
        return Err(format_err(
            &img_name,
            "image count",
            format!("{count} images but {} labels", labels.len()),
        ));
    }
    Ok(RawImages {
        height,
        width,
        pixels,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePreprocessSpec {
    pub quantize_levels: u32,
    pub height: usize,
    pub width: usize,
}

impl ImagePreprocessSpec {
    pub fn square(quantize_levels: u32, side: usize) -> Self {
        Self {
            quantize_levels,
            height: side,
            width: side,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.quantize_levels < 2 {
            return Err(DataError::Usage(format!(
                "quantize_levels must be at least 2, got {}",
                self.quantize_levels
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(DataError::Usage(format!(
                "degenerate shape {}×{}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

/// `log2(Q · S)`.
pub fn intrinsic_dimension(spec: &ImagePreprocessSpec) -> f64 {
    (spec.quantize_levels as f64 * spec.pixel_count() as f64).log2()
}

/// Bilinear sample with half-pixel centres (`src = (dst + 0.5)·in/out − 0.5`,
/// clamped at the border), values in [0, 1].
fn resize_bilinear(src: &[u8], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let coord = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, s - i0 as f64)
    };
    let px = |r: usize, c: usize| src[r * w + c] as f64 / 255.0;
    let mut out = Vec::with_capacity(oh * ow);
    for r in 0..oh {
        let (r0, r1, fr) = coord(r, h, oh);
        for c in 0..ow {
            let (c0, c1, fc) = coord(c, w, ow);
            let top = px(r0, c0) * (1.0 - fc) + px(r0, c1) * fc;
            let bot = px(r1, c0) * (1.0 - fc) + px(r1, c1) * fc;
            out.push(top * (1.0 - fr) + bot * fr);
        }
    }
    out
}

/// Resizes, quantizes to `Q` uniform levels and maps to [-1, 1]; one row
/// per image, flattened row-major.
pub fn preprocess_images(raw: &RawImages, spec: &ImagePreprocessSpec) -> Result<Matrix, DataError> {
    spec.validate()?;
    let q = spec.quantize_levels as f64;
    let s = spec.pixel_count();
    let mut data = Vec::with_capacity(raw.len() * s);
    for i in 0..raw.len() {
        for v in resize_bilinear(raw.image(i), raw.height, raw.width, spec.height, spec.width) {
            let level = (v * q).floor().min(q - 1.0);
            data.push(level / (q - 1.0) * 2.0 - 1.0);
        }
    }
    Ok(Matrix::from_vec(raw.len(), s, data))
}

/// Splits preprocessed images into one task per class group, taking the
/// first `n_per_class` samples of each class in file order. Labels keep
/// their digit value so all tasks share a 10-way head.
pub fn build_image_tasks(
    images: &Matrix,
    labels: &[u8],
    plan: &[Vec<u8>],
    n_per_class: usize,
    intrinsic_dim: Option<f64>,
) -> Result<Vec<TaskDataset>, DataError> {
    if images.rows() != labels.len() {
        return Err(DataError::Usage(format!(
            "{} images vs {} labels",
            images.rows(),
            labels.len()
        )));
    }
    let mut seen = [false; 10];
    for &c in plan.iter().flatten() {
        if c > 9 || std::mem::replace(&mut seen[c as usize], true) {
            return Err(DataError::Usage(format!("class {c} is invalid or used by two tasks")));
        }
    }
    plan.iter()
        .enumerate()
        .map(|(t, classes)| {
            let mut per_class: Vec<Vec<usize>> = Vec::new();
            for &c in classes {
                let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).take(n_per_class).collect();
                if idx.len() < n_per_class {
                    return Err(DataError::Insufficient {
                        class: c,
                        needed: n_per_class,
                        available: idx.len(),
                    });
                }
                per_class.push(idx);
            }
            // Interleave classes so any prefix is balanced.
            let rows: Vec<usize> = (0..n_per_class)
                .flat_map(|k| per_class.iter().map(move |v| v[k]))
                .collect();
            let targets = Targets::Labels(rows.iter().map(|&r| labels[r] as usize).collect());
            let mut task = TaskDataset::new(t + 1, images.select_rows(&rows), targets, TaskKind::Image)?;
            task.meta.intrinsic_dim = intrinsic_dim;
            Ok(task)
        })
        .collect()
}
