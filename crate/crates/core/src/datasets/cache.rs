//! On-disk MultiMNIST cache:
//! `"MM01" | n: u64 LE | n·784 f32 LE pixels | n top-left labels | n bottom-right labels`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{MultiMnistSet, Split, PIXELS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MM01";

/// Cache file for one split generated with `pair_seed`.
pub fn cache_path(dir: &Path, split: Split, pair_seed: u64) -> PathBuf {
    dir.join(format!("multimnist-{split}-pair{pair_seed}.bin"))
}

pub fn write_cache(path: &Path, set: &MultiMnistSet) -> Result<()> {
    let n = set.len();
    let mut out = Vec::with_capacity(12 + n * (PIXELS * 4 + 2));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in &set.images {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&set.labels_tl);
    out.extend_from_slice(&set.labels_br);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path, split: Split) -> Result<MultiMnistSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |offset: usize, reason: &str| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(fail(0, "not a MultiMNIST cache"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let expected = 12 + n * PIXELS * 4 + 2 * n;
    if bytes.len() != expected {
        return Err(fail(bytes.len().min(expected), "cache size does not match header"));
    }
    let px_end = 12 + n * PIXELS * 4;
    let images = bytes[12..px_end]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let set = MultiMnistSet {
        images,
        labels_tl: bytes[px_end..px_end + n].to_vec(),
        labels_br: bytes[px_end + n..].to_vec(),
        split,
    };
    set.validate().map_err(|e| fail(12, &e.to_string()))?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_name() {
        let dir = tempfile::tempdir().unwrap();
        let set = MultiMnistSet {
            images: (0..2 * PIXELS).map(|i| (i % 5) as f32 / 4.0).collect(),
            labels_tl: vec![1, 2],
            labels_br: vec![7, 0],
            split: Split::Test,
        };
        let p = cache_path(dir.path(), Split::Test, 42);
        assert!(p.ends_with("multimnist-test-pair42.bin"));
        write_cache(&p, &set).unwrap();
        assert_eq!(read_cache(&p, Split::Test).unwrap(), set);

        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_cache(&p, Split::Test), Err(Error::Format { .. })));
    }
}
