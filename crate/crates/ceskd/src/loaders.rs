//! Readers for the IDX (MNIST family) and CIFAR-10 binary formats.

use std::path::{Path, PathBuf};

use ceskd_core::data::{Dataset, Split};
use ceskd_core::Tensor;

use crate::error::{self, Error, Result};

pub const IDX_IMAGES: u32 = 0x0000_0803;
pub const IDX_LABELS: u32 = 0x0000_0801;
pub const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;
pub const CIFAR_CLASSES: usize = 10;

fn be_u32(bytes: &[u8], at: usize, file: &str) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| {
        Error::bytes(file, bytes.len(), format!("file is {} bytes, header needs {}", bytes.len(), at + 4))
    })?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32, file: &str) -> Result<()> {
    let magic = be_u32(bytes, 0, file)?;
    if magic != expected {
        return Err(Error::bytes(file, 0, format!("magic {magic:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

fn check_length(bytes: &[u8], expected: usize, file: &str) -> Result<()> {
    if bytes.len() != expected {
        let what = if bytes.len() < expected { "truncated" } else { "trailing data" };
        return Err(Error::bytes(
            file,
            bytes.len().min(expected),
            format!("{what}: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok(())
}

/// Parses an IDX image file into `(count, rows, cols, pixels in [0, 1])`.
pub fn parse_idx_images(bytes: &[u8], file: &str) -> Result<(usize, usize, usize, Vec<f32>)> {
    check_magic(bytes, IDX_IMAGES, file)?;
    let n = be_u32(bytes, 4, file)? as usize;
    let rows = be_u32(bytes, 8, file)? as usize;
    let cols = be_u32(bytes, 12, file)? as usize;
    check_length(bytes, 16 + n * rows * cols, file)?;
    let pixels = bytes[16..].iter().map(|&b| f32::from(b) / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8], file: &str) -> Result<Vec<usize>> {
    check_magic(bytes, IDX_LABELS, file)?;
    let n = be_u32(bytes, 4, file)? as usize;
    check_length(bytes, 8 + n, file)?;
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

/// Loads an image/label IDX pair as `[n, 1, rows, cols]` samples. The class
/// count is ten, or more if a label requires it.
pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    let image_file = images.display().to_string();
    let label_file = labels.display().to_string();
    let (n, rows, cols, pixels) = parse_idx_images(&error::read(images)?, &image_file)?;
    let labels = parse_idx_labels(&error::read(labels)?, &label_file)?;
    if labels.len() != n {
        return Err(Error::bytes(
            &label_file,
            4,
            format!("{} labels for {n} images in {image_file}", labels.len()),
        ));
    }
    let classes = labels.iter().max().map_or(CIFAR_CLASSES, |&m| (m + 1).max(10));
    let features = Tensor::new(vec![n, 1, rows, cols], pixels)?;
    Ok(Dataset::new(features, labels, classes, split)?)
}

/// Parses concatenated 3073-byte records: one label byte, then the red,
/// green and blue 32x32 planes.
pub fn parse_cifar10(bytes: &[u8], file: &str) -> Result<(Vec<f32>, Vec<usize>)> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        let whole = bytes.len() / CIFAR_RECORD * CIFAR_RECORD;
        return Err(Error::bytes(
            file,
            whole,
            format!("length {} is not a multiple of the {CIFAR_RECORD}-byte record", bytes.len()),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD - 1));
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        let label = rec[0] as usize;
        if label >= CIFAR_CLASSES {
            return Err(Error::bytes(file, i * CIFAR_RECORD, format!("label {label} in record {i} is not below 10")));
        }
        labels.push(label);
        pixels.extend(rec[1..].iter().map(|&b| f32::from(b) / 255.0));
    }
    Ok((pixels, labels))
}

pub fn load_cifar10_bin(paths: &[PathBuf], split: Split) -> Result<Dataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for p in paths {
        let (px, lb) = parse_cifar10(&error::read(p)?, &p.display().to_string())?;
        pixels.extend(px);
        labels.extend(lb);
    }
    let features = Tensor::new(vec![labels.len(), 3, 32, 32], pixels)?;
    Ok(Dataset::new(features, labels, CIFAR_CLASSES, split)?)
}
