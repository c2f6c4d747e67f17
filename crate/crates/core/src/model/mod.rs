//! Shared-encoder, multi-head MultiMNIST classifier and the flat parameter
//! views used for snapshot/delta arithmetic.
//!
//! Canonical parameter layout (the order of [`ParamVector`] entries):
//!
//! | entry        | shape        |
//! |--------------|--------------|
//! | `conv1.w`    | 10×1×5×5     |
//! | `conv1.b`    | 10           |
//! | `conv2.w`    | 20×10×5×5    |
//! | `conv2.b`    | 20           |
//! | `fc.w`       | 320×50       |
//! | `fc.b`       | 50           |
//! | `head.<t>.w` | 50×10        |
//! | `head.<t>.b` | 10           |
//!
//! Heads follow the encoder in task registration order.

mod checkpoint;
mod params;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use params::{combine, ParamVector};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Tensor, Var};

pub const IMAGE_SIDE: usize = 28;
pub const NUM_CLASSES: usize = 10;
pub const ENCODER_PARAMS: usize = 10 * 25 + 10 + 20 * 10 * 25 + 20 + 320 * 50 + 50;
pub const HEAD_PARAMS: usize = 50 * NUM_CLASSES + NUM_CLASSES;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId(String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// One term of a weighted multitask loss: `weight · CE(head(task), labels)`.
#[derive(Clone, Copy, Debug)]
pub struct LossTerm<'a> {
    pub task: usize,
    pub labels: &'a [usize],
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct LossGrad<T> {
    /// Unweighted mean loss of each term.
    pub losses: Vec<f64>,
    /// Gradient of the weighted sum, in canonical layout order.
    pub grad: Vec<T>,
}

/// What the training regimes need from a model: flat parameters, a weighted
/// per-task loss with its gradient, and per-task logits.
pub trait TaskModel: Clone + Send + Sync {
    type Scalar: Real;

    fn task_ids(&self) -> &[TaskId];

    fn params(&self) -> &[Self::Scalar];

    fn params_mut(&mut self) -> &mut [Self::Scalar];

    fn loss_and_grad(
        &self,
        images: &Tensor<Self::Scalar>,
        terms: &[LossTerm<'_>],
    ) -> Result<LossGrad<Self::Scalar>>;

    /// Logits for every registered task, in registration order.
    fn all_logits(&self, images: &Tensor<Self::Scalar>) -> Result<Vec<Tensor<Self::Scalar>>>;

    fn task_index(&self, task: &TaskId) -> Result<usize> {
        self.task_ids()
            .iter()
            .position(|t| t == task)
            .ok_or_else(|| Error::UnknownTask(task.to_string()))
    }

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn snapshot(&self) -> ParamVector {
        ParamVector::new(self.params().iter().map(|v| v.to_f64()).collect())
    }

    fn restore(&mut self, p: &ParamVector) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::config(format!(
                "cannot restore {} values into a model with {} parameters",
                p.len(),
                self.param_count()
            )));
        }
        for (dst, &src) in self.params_mut().iter_mut().zip(p.as_slice()) {
            *dst = Self::Scalar::from_f64(src);
        }
        Ok(())
    }
}

/// Parameter initialisation scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Init {
    /// Uniform in ±1/√fan_in, weights and biases alike.
    #[default]
    UniformFanIn,
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::UniformFanIn => "uniform_fan_in",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform_fan_in" => Ok(Init::UniformFanIn),
            other => Err(Error::config(format!("unknown initializer `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub fan_in: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

fn layout_for(tasks: &[TaskId]) -> Vec<ParamEntry> {
    let mut specs: Vec<(String, Vec<usize>, usize)> = vec![
        ("conv1.w".into(), vec![10, 1, 5, 5], 25),
        ("conv1.b".into(), vec![10], 25),
        ("conv2.w".into(), vec![20, 10, 5, 5], 250),
        ("conv2.b".into(), vec![20], 250),
        ("fc.w".into(), vec![320, 50], 320),
        ("fc.b".into(), vec![50], 320),
    ];
    for t in tasks {
        specs.push((format!("head.{t}.w"), vec![50, NUM_CLASSES], 50));
        specs.push((format!("head.{t}.b"), vec![NUM_CLASSES], 50));
    }
    let mut offset = 0;
    specs
        .into_iter()
        .map(|(name, shape, fan_in)| {
            let entry = ParamEntry {
                name,
                shape,
                offset,
                fan_in,
            };
            offset += entry.len();
            entry
        })
        .collect()
}

pub(crate) fn check_task_list(tasks: &[TaskId]) -> Result<()> {
    if tasks.is_empty() {
        return Err(Error::config("at least one task is required"));
    }
    for (i, t) in tasks.iter().enumerate() {
        if tasks[..i].contains(t) {
            return Err(Error::config(format!("duplicate task id `{t}`")));
        }
    }
    Ok(())
}

/// Convolutional encoder (conv5-pool-relu ×2, fc 320→50, relu) shared by
/// per-task linear heads (50→10).
#[derive(Clone, Debug)]
pub struct MultiHeadModel<T> {
    tasks: Vec<TaskId>,
    layout: Vec<ParamEntry>,
    params: Vec<T>,
    init: Init,
}

/// Model parameters recorded on a tape, one [`Var`] per layout entry.
pub struct BoundParams(Vec<Var>);

impl BoundParams {
    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl<T: Real> MultiHeadModel<T> {
    pub fn new(tasks: &[TaskId], seed: u64) -> Result<Self> {
        Self::with_init(tasks, seed, Init::default())
    }

    pub fn with_init(tasks: &[TaskId], seed: u64, init: Init) -> Result<Self> {
        check_task_list(tasks)?;
        let layout = layout_for(tasks);
        let total = ENCODER_PARAMS + tasks.len() * HEAD_PARAMS;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(total);
        for entry in &layout {
            match init {
                Init::UniformFanIn => {
                    let bound = 1.0 / (entry.fan_in as f64).sqrt();
                    params.extend((0..entry.len()).map(|_| T::from_f64(rng.gen_range(-bound..bound))));
                }
            }
        }
        assert_eq!(params.len(), total, "layout does not match declared shapes");
        Ok(Self {
            tasks: tasks.to_vec(),
            layout,
            params,
            init,
        })
    }

    pub fn layout(&self) -> &[ParamEntry] {
        &self.layout
    }

    pub fn init(&self) -> Init {
        self.init
    }

    /// Layout entries belonging to the given task's head.
    pub fn head_entries(&self, task: usize) -> [&ParamEntry; 2] {
        [&self.layout[6 + 2 * task], &self.layout[7 + 2 * task]]
    }

    pub fn encoder_len(&self) -> usize {
        ENCODER_PARAMS
    }

    /// Records every parameter tensor on `tape`.
    pub fn bind(&self, tape: &mut Tape<T>, track: bool) -> BoundParams {
        let vars = self
            .layout
            .iter()
            .map(|e| {
                let t = Tensor::new(&e.shape, self.params[e.range()].to_vec())
                    .expect("layout shapes are valid");
                tape.leaf(if track { t.tracked() } else { t })
            })
            .collect();
        BoundParams(vars)
    }

    /// Shared encoder: `[batch, 1, 28, 28] -> [batch, 50]`.
    pub fn encode(&self, tape: &mut Tape<T>, p: &BoundParams, images: Var) -> Result<Var> {
        let v = &p.0;
        let batch = tape.value(images).shape()[0];
        let h = tape.conv2d(images, v[0], v[1])?;
        let h = tape.maxpool2(h)?;
        let h = tape.relu(h)?;
        let h = tape.conv2d(h, v[2], v[3])?;
        let h = tape.maxpool2(h)?;
        let h = tape.relu(h)?;
        let h = tape.reshape(h, &[batch, 320])?;
        let h = tape.linear(h, v[4], v[5])?;
        tape.relu(h)
    }

    pub fn head(&self, tape: &mut Tape<T>, p: &BoundParams, features: Var, task: usize) -> Result<Var> {
        if task >= self.tasks.len() {
            return Err(Error::UnknownTask(format!("#{task}")));
        }
        tape.linear(features, p.0[6 + 2 * task], p.0[7 + 2 * task])
    }

    pub fn forward(&self, tape: &mut Tape<T>, p: &BoundParams, images: Var, task: &TaskId) -> Result<Var> {
        let idx = self.task_index(task)?;
        let features = self.encode(tape, p, images)?;
        self.head(tape, p, features, idx)
    }

    /// Logits for one task without recording gradients.
    pub fn logits(&self, images: &Tensor<T>, task: &TaskId) -> Result<Tensor<T>> {
        let idx = self.task_index(task)?;
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let x = tape.leaf(images.clone());
        let features = self.encode(&mut tape, &p, x)?;
        let out = self.head(&mut tape, &p, features, idx)?;
        Ok(tape.value(out).clone())
    }

    /// Gathers per-entry gradients from a tape into one flat vector; entries
    /// the loss did not reach contribute exact zeros.
    pub fn collect_grads(&self, tape: &Tape<T>, p: &BoundParams) -> Vec<T> {
        let mut grad = vec![T::zero(); self.params.len()];
        for (entry, &v) in self.layout.iter().zip(&p.0) {
            if let Some(g) = tape.grad(v) {
                grad[entry.range()].copy_from_slice(g);
            }
        }
        grad
    }
}

/// Builds `Σ weight_k · CE_k` on `tape`, returning the total and the
/// unweighted per-term losses.
pub(crate) fn weighted_loss<T: Real>(
    tape: &mut Tape<T>,
    logits: &[Var],
    terms: &[LossTerm<'_>],
) -> Result<(Var, Vec<f64>)> {
    if terms.is_empty() {
        return Err(Error::argument("empty loss"));
    }
    let mut total: Option<Var> = None;
    let mut losses = Vec::with_capacity(terms.len());
    for (term, &z) in terms.iter().zip(logits) {
        let l = tape.cross_entropy_mean(z, term.labels)?;
        losses.push(tape.value(l).item()?.to_f64());
        let scaled = if term.weight == 1.0 {
            l
        } else {
            tape.scale(l, T::from_f64(term.weight))?
        };
        total = Some(match total {
            None => scaled,
            Some(acc) => tape.add(acc, scaled)?,
        });
    }
    Ok((total.expect("non-empty"), losses))
}

impl<T: Real> TaskModel for MultiHeadModel<T> {
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
        let p = self.bind(&mut tape, true);
        let x = tape.leaf(images.clone());
        let features = self.encode(&mut tape, &p, x)?;
        let logits = terms
            .iter()
            .map(|t| self.head(&mut tape, &p, features, t.task))
            .collect::<Result<Vec<_>>>()?;
        let (total, losses) = weighted_loss(&mut tape, &logits, terms)?;
        tape.backward(total)?;
        Ok(LossGrad {
            losses,
            grad: self.collect_grads(&tape, &p),
        })
    }

    fn all_logits(&self, images: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let x = tape.leaf(images.clone());
        let features = self.encode(&mut tape, &p, x)?;
        (0..self.tasks.len())
            .map(|t| {
                let z = self.head(&mut tape, &p, features, t)?;
                Ok(tape.value(z).clone())
            })
            .collect()
    }
}
