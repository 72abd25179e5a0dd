//! IDX container reader (the MNIST distribution format).
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for rank-3 unsigned-byte
//! image stacks, `0x00000801` for rank-1 label vectors), one big-endian `u32`
//! per dimension, then the unsigned-byte payload. Gzipped files are
//! decompressed transparently.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use thiserror::Error;

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("{path}: bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: header truncated")]
    TruncatedHeader { path: PathBuf },
    #[error("{path}: image payload has {found} bytes, header declares {expected}")]
    TruncatedImages {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: label payload has {found} bytes, header declares {expected}")]
    TruncatedLabels {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {extra} unexpected bytes after the payload")]
    TrailingBytes { path: PathBuf, extra: usize },
    #[error("{path}: image dimensions {rows}x{cols} invalid{detail}")]
    WrongDims {
        path: PathBuf,
        rows: usize,
        cols: usize,
        detail: String,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>, IdxError> {
    let found = be_u32(bytes, 0).ok_or_else(|| IdxError::TruncatedHeader {
        path: path.to_path_buf(),
    })?;
    if found != magic {
        return Err(IdxError::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    (0..dims)
        .map(|d| {
            be_u32(bytes, 4 + 4 * d)
                .map(|v| v as usize)
                .ok_or_else(|| IdxError::TruncatedHeader {
                    path: path.to_path_buf(),
                })
        })
        .collect()
}

/// Raw images: `(count, rows, cols, bytes)`.
pub fn read_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let dims = header(&bytes, path, IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(IdxError::WrongDims {
            path: path.to_path_buf(),
            rows,
            cols,
            detail: String::new(),
        }
        .into());
    }
    let expected = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < expected {
        return Err(IdxError::TruncatedImages {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        }
        .into());
    }
    if payload.len() > expected {
        return Err(IdxError::TrailingBytes {
            path: path.to_path_buf(),
            extra: payload.len() - expected,
        }
        .into());
    }
    Ok((n, rows, cols, payload.to_vec()))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    let dims = header(&bytes, path, LABELS_MAGIC, 1)?;
    let expected = dims[0];
    let payload = &bytes[8..];
    if payload.len() < expected {
        return Err(IdxError::TruncatedLabels {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        }
        .into());
    }
    if payload.len() > expected {
        return Err(IdxError::TrailingBytes {
            path: path.to_path_buf(),
            extra: payload.len() - expected,
        }
        .into());
    }
    Ok(payload.to_vec())
}

/// Loads an image/label file pair; pixel bytes are scaled to `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<LabeledDataset> {
    let (n, rows, cols, pixels) = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    if labels.len() != n {
        return Err(IdxError::CountMismatch {
            images: n,
            labels: labels.len(),
        }
        .into());
    }
    if n == 0 {
        return Err(Error::Data(format!("{} contains no images", images_path.display())));
    }
    let samples = Tensor::new(
        vec![n, rows, cols],
        pixels.iter().map(|&b| f64::from(b) / 255.0).collect(),
    )?;
    LabeledDataset::new(samples, labels.into_iter().map(u32::from).collect(), split)
}

fn find(dir: &Path, stem: &str) -> PathBuf {
    let plain = dir.join(stem);
    if plain.exists() {
        plain
    } else {
        dir.join(format!("{stem}.gz"))
    }
}

/// Loads the train and test splits from a directory holding the four
/// standard MNIST files (optionally gzipped); images must be 28x28.
pub fn load_mnist_dir(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let load = |prefix: &str, split| -> Result<LabeledDataset> {
        let images = find(dir, &format!("{prefix}-images-idx3-ubyte"));
        let ds = load_idx(&images, &find(dir, &format!("{prefix}-labels-idx1-ubyte")), split)?;
        let shape = ds.sample_shape();
        if shape != [28, 28] {
            return Err(IdxError::WrongDims {
                path: images,
                rows: shape[0],
                cols: shape[1],
                detail: ", MNIST images are 28x28".into(),
            }
            .into());
        }
        Ok(ds)
    };
    Ok((load("train", Split::Train)?, load("t10k", Split::Test)?))
}

/// Serializes bytes as an uncompressed IDX image file.
pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols);
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
