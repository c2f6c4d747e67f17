//! Deterministic index sampling. Every draw is a pure function of its key.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SPLIT_SALT: u64 = 0x5eed_0000_0000_0001;
const FRACTION_SALT: u64 = 0x5eed_0000_0000_0002;
const BATCH_SALT: u64 = 0x5eed_0000_0000_0003;
const SUBSET_SALT: u64 = 0x5eed_0000_0000_0004;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds several integers into one RNG seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Identifies one sampling stream: run seed, epoch, and the data stream
/// (a task's label binding, see [`crate::datasets::TaskSpec::stream`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SampleKey {
    pub seed: u64,
    pub epoch: u64,
    pub stream: u64,
}

impl SampleKey {
    pub fn new(seed: u64, epoch: usize, stream: u64) -> Self {
        Self {
            seed,
            epoch: epoch as u64,
            stream,
        }
    }
}

/// Splits `0..n` into (train, dev) index sets, both ascending.
pub fn split_indices(n: usize, dev_size: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if dev_size >= n {
        return Err(Error::config(format!(
            "dev split of {dev_size} leaves no training data out of {n}"
        )));
    }
    let mut dev = index::sample(&mut rng(&[SPLIT_SALT, seed]), n, dev_size).into_vec();
    dev.sort_unstable();
    let mut in_dev = vec![false; n];
    dev.iter().for_each(|&i| in_dev[i] = true);
    let train = (0..n).filter(|&i| !in_dev[i]).collect();
    Ok((train, dev))
}

/// A deterministic subset of `size` indices out of `0..n`, ascending.
pub fn subset_indices(n: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > n {
        return Err(Error::config(format!("subset of {size} requested from {n} items")));
    }
    let mut idx = index::sample(&mut rng(&[SUBSET_SALT, seed]), n, size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::config(format!("sampling ratio must lie in (0, 1], got {rho}")));
    }
    Ok(())
}

/// `floor(rho·n)` distinct indices of `0..n` in random order.
pub fn sample_fraction(n: usize, rho: f64, key: SampleKey) -> Result<Vec<usize>> {
    check_rho(rho)?;
    let count = ((rho * n as f64) + 1e-9).floor() as usize;
    let mut r = rng(&[FRACTION_SALT, key.seed, key.epoch, key.stream]);
    Ok(index::sample(&mut r, n, count.min(n)).into_vec())
}

/// Shuffles `indices` and cuts them into batches of `batch_size` (the last
/// one possibly shorter).
pub fn batches(indices: &[usize], batch_size: usize, key: SampleKey) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut rng(&[BATCH_SALT, key.seed, key.epoch, key.stream]));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
