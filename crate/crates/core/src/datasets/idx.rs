//! Big-endian IDX files as distributed for MNIST, raw or gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded MNIST split: pixels scaled to [0, 1], row-major per image.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMnist {
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl RawMnist {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let px = self.rows * self.cols;
        &self.images[i * px..(i + 1) * px]
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn format_err(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(path, offset, "truncated header"))
}

/// Parses an images file body; returns (count, rows, cols, pixels).
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("expected image magic {IMAGES_MAGIC:#010x}, found {magic:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let body = &bytes[16..];
    let need = n * rows * cols;
    if body.len() < need {
        return Err(format_err(
            path,
            bytes.len(),
            format!("truncated: header declares {n} images of {rows}x{cols} pixels"),
        ));
    }
    let pixels = body[..need].iter().map(|&b| b as f32 / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("expected label magic {LABELS_MAGIC:#010x}, found {magic:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(format_err(
            path,
            bytes.len(),
            format!("truncated: header declares {n} labels"),
        ));
    }
    if let Some(pos) = body[..n].iter().position(|&l| l > 9) {
        return Err(format_err(path, 8 + pos, format!("label {} out of range", body[pos])));
    }
    Ok(body[..n].to_vec())
}

/// Loads an images/labels pair and checks that their counts agree.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawMnist> {
    let img_bytes = read_maybe_gz(images_path)?;
    let (n, rows, cols, images) = parse_images(&img_bytes, images_path)?;
    let labels = parse_labels(&read_maybe_gz(labels_path)?, labels_path)?;
    if labels.len() != n {
        return Err(format_err(
            labels_path,
            4,
            format!("{} labels for {n} images in {}", labels.len(), images_path.display()),
        ));
    }
    Ok(RawMnist {
        images,
        labels,
        rows,
        cols,
    })
}

fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::io(
        dir.join(stem),
        std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST file not found"),
    ))
}

/// Loads the standard `train-*` and `t10k-*` files from `dir`.
pub fn load_mnist_dir(dir: &Path) -> Result<(RawMnist, RawMnist)> {
    let train = load_idx(
        &locate(dir, "train-images-idx3-ubyte")?,
        &locate(dir, "train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        &locate(dir, "t10k-images-idx3-ubyte")?,
        &locate(dir, "t10k-labels-idx1-ubyte")?,
    )?;
    Ok((train, test))
}

/// Serialises images/labels in IDX layout (used to build fixtures).
pub fn encode_idx(images: &[u8], labels: &[u8], rows: usize, cols: usize) -> (Vec<u8>, Vec<u8>) {
    let n = labels.len();
    let mut img = Vec::with_capacity(16 + images.len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend_from_slice(images);
    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> (Vec<u8>, Vec<u8>) {
        let pixels: Vec<u8> = (0..n * 784).map(|i| (i % 256) as u8).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        encode_idx(&pixels, &labels, 28, 28)
    }

    #[test]
    fn parses_hand_built_fixture() {
        let (img, lab) = fixture(10);
        let p = Path::new("fixture");
        let (n, rows, cols, px) = parse_images(&img, p).unwrap();
        assert_eq!((n, rows, cols), (10, 28, 28));
        assert_eq!(px[255], 1.0);
        assert_eq!(px[0], 0.0);
        assert_eq!(parse_labels(&lab, p).unwrap().len(), 10);
    }

    #[test]
    fn wrong_magic() {
        let (_, lab) = fixture(2);
        assert!(matches!(
            parse_images(&lab, Path::new("x")),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn truncated_body() {
        let (img, _) = fixture(3);
        let cut = &img[..img.len() - 100];
        match parse_images(cut, Path::new("x")) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, cut.len()),
            other => panic!("unexpected {:?}", other.map(|r| r.0)),
        }
        assert!(parse_images(&img[..10], Path::new("x")).is_err());
    }
}
