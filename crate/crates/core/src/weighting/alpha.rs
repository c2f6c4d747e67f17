//! α tuning: gradient descent on the target dev loss at `θ + Σ αᵢ δᵢ`.
//!
//! The gradient with respect to αᵢ is `⟨δᵢ, ∇θ L_dev⟩`, so one dev-set
//! gradient serves every task at each step.

use crate::datasets::{MultiMnistSet, SampleBatch, TaskSpec};
use crate::error::{Error, Result};
use crate::harness::eval::EVAL_CHUNK;
use crate::model::{combine, LossTerm, ParamVector, TaskModel};
use crate::optim::SgdState;
use crate::tensor::Real;

/// A differentiable scalar objective over flat parameters.
pub trait DevObjective {
    /// Loss and gradient at `theta`.
    fn loss_and_grad(&mut self, theta: &ParamVector) -> Result<(f64, Vec<f64>)>;
}

/// Mean cross-entropy of one task over a whole dev set, evaluated on a
/// private clone of the model.
pub struct TargetDevLoss<'a, M> {
    model: M,
    dev: &'a MultiMnistSet,
    task: usize,
    spec: TaskSpec,
    chunk: usize,
}

impl<'a, M: TaskModel> TargetDevLoss<'a, M> {
    pub fn new(model: &M, dev: &'a MultiMnistSet, task: usize, spec: &TaskSpec) -> Result<Self> {
        if dev.is_empty() {
            return Err(Error::config("empty dev set"));
        }
        Ok(Self {
            model: model.clone(),
            dev,
            task,
            spec: spec.clone(),
            chunk: EVAL_CHUNK,
        })
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }
}

impl<M: TaskModel> DevObjective for TargetDevLoss<'_, M> {
    fn loss_and_grad(&mut self, theta: &ParamVector) -> Result<(f64, Vec<f64>)> {
        self.model.restore(theta)?;
        let n = self.dev.len();
        let mut loss = 0.0;
        let mut grad = vec![0.0f64; theta.len()];
        let mut start = 0;
        while start < n {
            let end = (start + self.chunk).min(n);
            let batch = SampleBatch::<M::Scalar>::range(self.dev, start, end)?;
            let share = (end - start) as f64 / n as f64;
            let term = LossTerm {
                task: self.task,
                labels: batch.labels(self.spec.column),
                weight: share,
            };
            let lg = self.model.loss_and_grad(&batch.images, &[term])?;
            loss += share * lg.losses[0];
            for (g, v) in grad.iter_mut().zip(&lg.grad) {
                *g += v.to_f64();
            }
            start = end;
        }
        Ok((loss, grad))
    }
}

/// `g_i = ⟨δ_i, ∇θ L(base + Σ α_j δ_j)⟩`, returned with the loss there.
pub fn alpha_gradient(
    base: &ParamVector,
    deltas: &[ParamVector],
    alphas: &[f64],
    objective: &mut impl DevObjective,
) -> Result<(f64, Vec<f64>)> {
    let theta = combine(base, deltas, alphas)?;
    let (loss, grad) = objective.loss_and_grad(&theta)?;
    let grad = ParamVector::new(grad);
    let g = deltas.iter().map(|d| d.dot(&grad)).collect::<Result<Vec<_>>>()?;
    Ok((loss, g))
}

/// Meta-optimiser settings for the α variables.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSettings {
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for AlphaSettings {
    fn default() -> Self {
        Self {
            steps: 10,
            lr: 0.005,
            momentum: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaTrace {
    pub alphas: Vec<f64>,
    /// Dev loss before each step.
    pub losses: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// Starts every α at 1 and takes `settings.steps` momentum-SGD steps.
pub fn tune_alphas(
    base: &ParamVector,
    deltas: &[ParamVector],
    objective: &mut impl DevObjective,
    settings: &AlphaSettings,
    mut on_step: impl FnMut(usize, &[f64], &[f64], f64),
) -> Result<AlphaTrace> {
    if settings.steps == 0 {
        return Err(Error::config("α tuning needs at least one step"));
    }
    let mut alphas = vec![1.0f64; deltas.len()];
    let mut sgd = SgdState::<f64>::new(settings.lr, settings.momentum, deltas.len())?;
    let mut trace = AlphaTrace {
        alphas: Vec::new(),
        losses: Vec::with_capacity(settings.steps),
        grads: Vec::with_capacity(settings.steps),
    };
    for step in 0..settings.steps {
        let (loss, g) = alpha_gradient(base, deltas, &alphas, objective)?;
        on_step(step, &alphas, &g, loss);
        sgd.step(&mut alphas, &g)?;
        trace.losses.push(loss);
        trace.grads.push(g);
    }
    trace.alphas = alphas;
    Ok(trace)
}
