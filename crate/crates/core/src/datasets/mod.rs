//! MNIST loading, MultiMNIST synthesis, splits, sampling and batching.

mod cache;
mod idx;
mod multimnist;
mod sampling;

use std::fmt;

pub use cache::{cache_path, read_cache, write_cache};
pub use idx::{encode_idx, load_idx, load_mnist_dir, parse_images, parse_labels, RawMnist};
pub use multimnist::{
    downscale_bilinear, draw_partners, make_multimnist, make_multimnist_with_partners, overlay_canvas,
    render_pair, CANVAS_SIDE, SHIFT,
};
pub use sampling::{batches, derive_seed, sample_fraction, split_indices, subset_indices, SampleKey};

use crate::error::{Error, Result};
use crate::model::{TaskId, IMAGE_SIDE, NUM_CLASSES};
use crate::tensor::{Real, Tensor};

pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

/// Which label array of a [`MultiMnistSet`] a task reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelColumn {
    TopLeft,
    BottomRight,
}

/// A task together with its data binding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub column: LabelColumn,
}

impl TaskSpec {
    pub fn new(id: impl Into<String>, column: LabelColumn) -> Self {
        Self {
            id: TaskId::new(id),
            column,
        }
    }

    pub fn top_left() -> Self {
        Self::new("tl", LabelColumn::TopLeft)
    }

    pub fn bottom_right() -> Self {
        Self::new("br", LabelColumn::BottomRight)
    }

    /// Sampling stream of this task's data. Tasks bound to the same labels
    /// draw identical subsets and batch orders.
    pub fn stream(&self) -> u64 {
        match self.column {
            LabelColumn::TopLeft => 0,
            LabelColumn::BottomRight => 1,
        }
    }
}

/// Overlaid-digit images with one label per digit position.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiMnistSet {
    /// `n × 1 × 28 × 28` pixels in [0, 1].
    pub images: Vec<f32>,
    pub labels_tl: Vec<u8>,
    pub labels_br: Vec<u8>,
    pub split: Split,
}

impl MultiMnistSet {
    pub fn len(&self) -> usize {
        self.labels_tl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels_tl.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i * PIXELS..(i + 1) * PIXELS]
    }

    pub fn labels(&self, column: LabelColumn) -> &[u8] {
        match column {
            LabelColumn::TopLeft => &self.labels_tl,
            LabelColumn::BottomRight => &self.labels_br,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.labels_br.len() != n || self.images.len() != n * PIXELS {
            return Err(Error::argument(format!(
                "inconsistent {} set: {} images, {}/{} labels",
                self.split,
                self.images.len() / PIXELS,
                n,
                self.labels_br.len()
            )));
        }
        if self.images.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::argument("pixel outside [0, 1]"));
        }
        if self
            .labels_tl
            .iter()
            .chain(&self.labels_br)
            .any(|&l| l as usize >= NUM_CLASSES)
        {
            return Err(Error::argument("label outside [0, 10)"));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Self {
        let mut images = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        Self {
            images,
            labels_tl: indices.iter().map(|&i| self.labels_tl[i]).collect(),
            labels_br: indices.iter().map(|&i| self.labels_br[i]).collect(),
            split,
        }
    }
}

/// Holds out `dev_size` random examples as the dev split.
pub fn split_dev(set: &MultiMnistSet, dev_size: usize, seed: u64) -> Result<(MultiMnistSet, MultiMnistSet)> {
    let (train, dev) = split_indices(set.len(), dev_size, seed)?;
    Ok((set.subset(&train, Split::Train), set.subset(&dev, Split::Dev)))
}

/// Images and both label arrays for a list of example indices.
#[derive(Clone, Debug)]
pub struct SampleBatch<T> {
    pub images: Tensor<T>,
    pub labels_tl: Vec<usize>,
    pub labels_br: Vec<usize>,
}

impl<T: Real> SampleBatch<T> {
    pub fn gather(set: &MultiMnistSet, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::argument("empty batch"));
        }
        let mut px = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            px.extend(set.image(i).iter().map(|&v| T::from_f64(v as f64)));
        }
        Ok(Self {
            images: Tensor::new(&[indices.len(), 1, IMAGE_SIDE, IMAGE_SIDE], px)?,
            labels_tl: indices.iter().map(|&i| set.labels_tl[i] as usize).collect(),
            labels_br: indices.iter().map(|&i| set.labels_br[i] as usize).collect(),
        })
    }

    /// Contiguous slice `start..end` of a set.
    pub fn range(set: &MultiMnistSet, start: usize, end: usize) -> Result<Self> {
        let idx: Vec<usize> = (start..end).collect();
        Self::gather(set, &idx)
    }

    pub fn len(&self) -> usize {
        self.labels_tl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels_tl.is_empty()
    }

    pub fn labels(&self, column: LabelColumn) -> &[usize] {
        match column {
            LabelColumn::TopLeft => &self.labels_tl,
            LabelColumn::BottomRight => &self.labels_br,
        }
    }
}
