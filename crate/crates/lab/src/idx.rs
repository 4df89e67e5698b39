//! IDX image/label files: big-endian header, unsigned bytes, pixels scaled by 1/255.

use std::path::Path;

use advcausal_core::data::{LabeledDataset, Split};
use advcausal_core::Tensor;

use crate::error::{self, LabError, LabResult};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path, what: &str) -> LabResult<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| LabError::format(path, format!("byte {at}"), format!("truncated {what}")))
}

/// Parses an image file into `(count, rows · cols, pixels in [0, 1])`.
pub fn parse_images(bytes: &[u8], path: &Path) -> LabResult<(usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != IMAGES_MAGIC {
        return Err(LabError::format(path, "byte 0", format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, path, "image count")? as usize;
    let rows = be_u32(bytes, 8, path, "row count")? as usize;
    let cols = be_u32(bytes, 12, path, "column count")? as usize;
    let dim = rows * cols;
    let body = &bytes[16..];
    let want = n * dim;
    if body.len() < want {
        return Err(LabError::format(
            path,
            format!("byte {}", 16 + body.len()),
            format!("truncated pixel data, expected {want} bytes"),
        ));
    }
    if body.len() > want {
        return Err(LabError::format(path, format!("byte {}", 16 + want), "trailing bytes"));
    }
    Ok((n, dim, body.iter().map(|&b| f64::from(b) / 255.0).collect()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> LabResult<Vec<usize>> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != LABELS_MAGIC {
        return Err(LabError::format(path, "byte 0", format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, path, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(LabError::format(
            path,
            format!("byte {}", 8 + body.len().min(n)),
            format!("label file declares {n} labels but holds {}", body.len()),
        ));
    }
    Ok(body.iter().map(|&b| usize::from(b)).collect())
}

/// Loads an image/label pair. `num_classes` defaults to the largest label plus one.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    num_classes: Option<usize>,
    split: Split,
) -> LabResult<LabeledDataset> {
    let (n, dim, pixels) = parse_images(&error::read(images_path)?, images_path)?;
    let labels = parse_labels(&error::read(labels_path)?, labels_path)?;
    if labels.len() != n {
        return Err(LabError::format(
            labels_path,
            "byte 4",
            format!("{} labels for {n} images", labels.len()),
        ));
    }
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(2, |m| (m + 1).max(2)));
    if let Some(i) = labels.iter().position(|&l| l >= classes) {
        return Err(LabError::format(
            labels_path,
            format!("byte {}", 8 + i),
            format!("label {} out of range for {classes} classes", labels[i]),
        ));
    }
    if n == 0 || dim == 0 {
        return Err(LabError::format(images_path, "byte 4", "no images"));
    }
    Ok(LabeledDataset::new(Tensor::new(vec![n, dim], pixels)?, labels, classes, split)?)
}

/// Serializes images (values in `[0, 1]`, rounded to bytes) to IDX.
pub fn encode_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
