//! Small synthetic problems with known task relationships, for exercising
//! the weighting regimes quickly.
//!
//! [`SharedSoftmax`] routes every task through one linear classifier, so
//! tasks whose labels disagree conflict directly in parameter space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::{MultiMnistSet, Split, PIXELS};
use crate::error::Result;
use crate::model::{check_task_list, weighted_loss, LossGrad, LossTerm, TaskId, TaskModel, NUM_CLASSES};
use crate::tensor::{Real, Tape, Tensor, Var};

/// One softmax regression `784 → 10` shared by all tasks: `W` (784×10)
/// followed by `b` (10).
#[derive(Clone, Debug)]
pub struct SharedSoftmax<T> {
    tasks: Vec<TaskId>,
    params: Vec<T>,
}

const WEIGHTS: usize = PIXELS * NUM_CLASSES;

impl<T: Real> SharedSoftmax<T> {
    /// Zero-initialised classifier.
    pub fn new(tasks: &[TaskId]) -> Result<Self> {
        check_task_list(tasks)?;
        Ok(Self {
            tasks: tasks.to_vec(),
            params: vec![T::zero(); WEIGHTS + NUM_CLASSES],
        })
    }

    fn logits(&self, tape: &mut Tape<T>, images: &Tensor<T>, track: bool) -> Result<(Var, Var, Var)> {
        let b = images.shape()[0];
        let mut w = Tensor::new(&[PIXELS, NUM_CLASSES], self.params[..WEIGHTS].to_vec())?;
        let mut bias = Tensor::new(&[NUM_CLASSES], self.params[WEIGHTS..].to_vec())?;
        if track {
            w = w.tracked();
            bias = bias.tracked();
        }
        let w = tape.leaf(w);
        let bias = tape.leaf(bias);
        let x = tape.leaf(images.clone());
        let x = tape.reshape(x, &[b, PIXELS])?;
        Ok((tape.linear(x, w, bias)?, w, bias))
    }
}

impl<T: Real> TaskModel for SharedSoftmax<T> {
    type Scalar = T;

    fn task_ids(&self) -> &[TaskId] {
        &self.tasks
    }

    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn loss_and_grad(&self, images: &Tensor<T>, terms: &[LossTerm<'_>]) -> Result<LossGrad<T>> {
        let mut tape = Tape::new();
        let (z, w, b) = self.logits(&mut tape, images, true)?;
        let logits = vec![z; terms.len()];
        let (total, losses) = weighted_loss(&mut tape, &logits, terms)?;
        tape.backward(total)?;
        let mut grad = tape.grad(w).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); WEIGHTS]);
        grad.extend_from_slice(tape.grad(b).unwrap_or(&[T::zero(); NUM_CLASSES]));
        Ok(LossGrad { losses, grad })
    }

    fn all_logits(&self, images: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut tape = Tape::new();
        let (z, _, _) = self.logits(&mut tape, images, false)?;
        Ok(vec![tape.value(z).clone(); self.tasks.len()])
    }
}

/// How the bottom-right labels relate to the top-left ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `br = (tl + 1) mod 10`: the tasks demand contradictory outputs.
    Conflicting,
    /// `br = tl`.
    Identical,
}

/// Class prototypes plus uniform pixel noise,
/// `x = (1 − noise)·proto[y] + noise·u`, with optional label noise.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeSpec {
    pub train: usize,
    pub dev: usize,
    pub noise: f64,
    /// Fraction of examples whose top-left label is redrawn uniformly.
    pub label_noise: f64,
    pub relation: Relation,
    pub seed: u64,
}

impl Default for PrototypeSpec {
    fn default() -> Self {
        Self {
            train: 1024,
            dev: 512,
            noise: 0.6,
            label_noise: 0.0,
            relation: Relation::Conflicting,
            seed: 0,
        }
    }
}

/// Returns `(train, dev)` drawn from the same prototypes.
pub fn prototype_sets(spec: &PrototypeSpec) -> (MultiMnistSet, MultiMnistSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let protos: Vec<Vec<f64>> = (0..NUM_CLASSES)
        .map(|_| (0..PIXELS).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut draw = |n: usize, split: Split| {
        let mut images = Vec::with_capacity(n * PIXELS);
        let mut labels_tl = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % NUM_CLASSES;
            images.extend(
                protos[y]
                    .iter()
                    .map(|&p| ((1.0 - spec.noise) * p + spec.noise * rng.gen::<f64>()) as f32),
            );
            let shown = if rng.gen_bool(spec.label_noise) {
                rng.gen_range(0..NUM_CLASSES)
            } else {
                y
            };
            labels_tl.push(shown as u8);
        }
        let labels_br = labels_tl
            .iter()
            .map(|&y| match spec.relation {
                Relation::Conflicting => (y + 1) % NUM_CLASSES as u8,
                Relation::Identical => y,
            })
            .collect();
        MultiMnistSet {
            images,
            labels_tl,
            labels_br,
            split,
        }
    };
    let train = draw(spec.train, Split::Train);
    let dev = draw(spec.dev, Split::Dev);
    (train, dev)
}
