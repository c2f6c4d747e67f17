//! Training regimes: singletask, uniform multitask, discriminative importance
//! weighting (DIW) and αVIL, which mixes per-task model deltas with
//! coefficients tuned on the target task's dev loss.

mod alpha;
mod avil;
mod baselines;
mod diw;

use std::thread;

pub use alpha::{alpha_gradient, tune_alphas, AlphaSettings, AlphaTrace, DevObjective, TargetDevLoss};
pub use avil::{avil_train, update_weights};
pub use baselines::{multitask_train, singletask_train};
pub use diw::diw_train;

use crate::datasets::{batches, sample_fraction, MultiMnistSet, SampleBatch, SampleKey, TaskSpec};
use crate::error::{Error, Result};
use crate::harness::eval::{evaluate, TaskScore};
use crate::model::{LossTerm, ParamVector, TaskId, TaskModel};
use crate::optim::{SgdState, WEIGHT_FLOOR};
use crate::tensor::Real;

/// Settings shared by every regime.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Fraction of each task's training data drawn per epoch.
    pub rho: f64,
    /// Lower bound for task weights.
    pub floor: f64,
    /// Keys every sampling draw of the run.
    pub seed: u64,
    /// Parallel workers for per-task delta collection.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            lr: 0.05,
            momentum: 0.9,
            rho: 1.0,
            floor: WEIGHT_FLOOR,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.floor > 0.0) {
            return Err(Error::config("clamp floor must be positive"));
        }
        SgdState::<f64>::new(self.lr, self.momentum, 0)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvilConfig {
    pub alpha: AlphaSettings,
    /// Skips tuning and keeps every α at 1.
    pub pinned_alpha: bool,
}

impl Default for AvilConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaSettings::default(),
            pinned_alpha: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiwConfig {
    /// Step size of the accuracy-difference weight update.
    pub eta_w: f64,
    /// Maximum joint attempts per epoch.
    pub patience: usize,
}

impl Default for DiwConfig {
    fn default() -> Self {
        Self {
            eta_w: 0.1,
            patience: 10,
        }
    }
}

/// Per-epoch metrics. Vectors are indexed by task in registration order;
/// `alphas` and `weights` are empty for regimes that do not use them.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: Vec<f64>,
    pub dev_accuracy: Vec<f64>,
    pub dev_loss: Vec<f64>,
    pub target_dev_loss: f64,
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Joint attempts used by DIW this epoch (0 elsewhere).
    pub inner_attempts: usize,
}

/// Best parameters seen for one task by dev accuracy (earliest epoch on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct BestSnapshot {
    pub task: TaskId,
    /// 0 means the initial parameters.
    pub epoch: usize,
    pub dev_accuracy: f64,
    pub params: ParamVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub tasks: Vec<TaskId>,
    pub rows: Vec<EpochRow>,
    pub best: Vec<BestSnapshot>,
    pub final_params: ParamVector,
    pub final_weights: Vec<f64>,
}

impl TrainOutcome {
    pub fn best_for(&self, task: &TaskId) -> Option<&BestSnapshot> {
        self.best.iter().find(|b| &b.task == task)
    }
}

/// Instrumentation hooks. Every method defaults to a no-op.
#[allow(unused_variables)]
pub trait Observer {
    fn tuning_started(&mut self, epoch: usize, alphas: &[f64]) {}
    fn alpha_step(&mut self, epoch: usize, step: usize, alphas: &[f64], grad: &[f64], dev_loss: f64) {}
    fn deltas_collected(&mut self, epoch: usize, deltas: &[ParamVector], normalized_weights: &[f64]) {}
    fn diw_attempt(&mut self, epoch: usize, attempt: usize, weights: &[f64], joint_accuracy: f64, accepted: bool) {}
    fn epoch_finished(&mut self, row: &EpochRow, params: &ParamVector) {}
}

impl Observer for () {}

/// Training/dev data and the task bindings of the model's heads.
#[derive(Clone, Copy, Debug)]
pub struct TaskData<'a> {
    pub tasks: &'a [TaskSpec],
    pub train: &'a MultiMnistSet,
    pub dev: &'a MultiMnistSet,
}

impl TaskData<'_> {
    pub(crate) fn check_model<M: TaskModel>(&self, model: &M) -> Result<()> {
        let ids: Vec<&TaskId> = self.tasks.iter().map(|t| &t.id).collect();
        if model.task_ids().iter().collect::<Vec<_>>() != ids {
            return Err(Error::config(format!(
                "model heads {:?} do not match task bindings {:?}",
                model.task_ids(),
                ids
            )));
        }
        if self.train.is_empty() {
            return Err(Error::config("empty training set"));
        }
        if self.dev.is_empty() {
            return Err(Error::config("empty dev set"));
        }
        Ok(())
    }

    pub(crate) fn target_index(&self, target: &TaskId) -> Result<usize> {
        self.tasks
            .iter()
            .position(|t| &t.id == target)
            .ok_or_else(|| Error::config(format!("target `{target}` is not among the tasks")))
    }
}

/// Batches for one task's epoch: a ρ-fraction drawn and shuffled on the
/// task's sampling stream.
pub fn epoch_batches(n: usize, task: &TaskSpec, cfg: &TrainConfig, epoch: usize) -> Result<Vec<Vec<usize>>> {
    let key = SampleKey::new(cfg.seed, epoch, task.stream());
    let idx = sample_fraction(n, cfg.rho, key)?;
    if idx.is_empty() {
        return Err(Error::config(format!(
            "rho = {} selects no examples out of {n}",
            cfg.rho
        )));
    }
    batches(&idx, cfg.batch_size, key)
}

/// One loss term of a training pass.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Term<'a> {
    pub task: usize,
    pub spec: &'a TaskSpec,
    pub weight: f64,
}

/// One SGD pass over `batches`, minimising `Σ weight · CE`. Returns the mean
/// unweighted batch loss of each term.
pub(crate) fn train_pass<M: TaskModel>(
    model: &mut M,
    sgd: &mut SgdState<M::Scalar>,
    set: &MultiMnistSet,
    batches: &[Vec<usize>],
    terms: &[Term<'_>],
    epoch: usize,
) -> Result<Vec<f64>> {
    if batches.is_empty() {
        return Err(Error::config("no training batches"));
    }
    let mut totals = vec![0.0; terms.len()];
    for idx in batches {
        let batch = SampleBatch::<M::Scalar>::gather(set, idx)?;
        let loss_terms: Vec<LossTerm<'_>> = terms
            .iter()
            .map(|t| LossTerm {
                task: t.task,
                labels: batch.labels(t.spec.column),
                weight: t.weight,
            })
            .collect();
        let lg = model.loss_and_grad(&batch.images, &loss_terms)?;
        if lg.losses.iter().any(|l| !l.is_finite()) || lg.grad.iter().any(|&g| !Real::to_f64(g).is_finite()) {
            return Err(Error::NonFinite { epoch });
        }
        for (acc, l) in totals.iter_mut().zip(&lg.losses) {
            *acc += l;
        }
        sgd.step(model.params_mut(), &lg.grad)?;
    }
    Ok(totals.into_iter().map(|t| t / batches.len() as f64).collect())
}

pub(crate) fn fresh_sgd<M: TaskModel>(model: &M, cfg: &TrainConfig) -> Result<SgdState<M::Scalar>> {
    SgdState::new(cfg.lr, cfg.momentum, model.param_count())
}

/// Trains task `task` for one pass from `base` with its loss scaled by
/// `w_norm`, and returns `(θ_task − base, mean train loss)`. The model is
/// left at `base` with a fresh momentum buffer.
#[allow(clippy::too_many_arguments)]
pub fn collect_delta<M: TaskModel>(
    model: &mut M,
    base: &ParamVector,
    task: usize,
    spec: &TaskSpec,
    w_norm: f64,
    set: &MultiMnistSet,
    batches: &[Vec<usize>],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(ParamVector, f64)> {
    if batches.is_empty() {
        return Err(Error::config("empty epoch data"));
    }
    let mut sgd = fresh_sgd(model, cfg)?;
    let terms = [Term {
        task,
        spec,
        weight: w_norm,
    }];
    let losses = train_pass(model, &mut sgd, set, batches, &terms, epoch)?;
    let delta = model.snapshot().delta_from(base)?;
    model.restore(base)?;
    Ok((delta, losses[0]))
}

/// Runs `job(i, model)` for every task index on up to `workers` threads,
/// each on its own clone of `model`. Results come back in task order.
pub(crate) fn per_task<M, R, F>(model: &M, n: usize, workers: usize, job: F) -> Result<Vec<R>>
where
    M: TaskModel,
    R: Send,
    F: Fn(usize, &mut M) -> Result<R> + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        let mut local = model.clone();
        return (0..n).map(|i| job(i, &mut local)).collect();
    }
    let mut slots: Vec<Option<Result<R>>> = (0..n).map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let job = &job;
                let mut local = model.clone();
                scope.spawn(move || {
                    (w..n)
                        .step_by(workers)
                        .map(|i| (i, job(i, &mut local)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every task scheduled")).collect()
}

/// Scores the model on dev, returning per-task scores.
pub(crate) fn dev_scores<M: TaskModel>(model: &M, data: &TaskData<'_>) -> Result<Vec<TaskScore>> {
    evaluate(model, data.dev, data.tasks)
}

/// Tracks the best snapshot for a set of tasks.
pub(crate) struct BestTracker {
    best: Vec<BestSnapshot>,
    tracked: Vec<usize>,
}

impl BestTracker {
    pub fn new(tasks: &[TaskSpec], tracked: Vec<usize>, init: &ParamVector, init_scores: &[TaskScore]) -> Self {
        let best = tracked
            .iter()
            .map(|&t| BestSnapshot {
                task: tasks[t].id.clone(),
                epoch: 0,
                dev_accuracy: init_scores[t].accuracy,
                params: init.clone(),
            })
            .collect();
        Self { best, tracked }
    }

    pub fn observe(&mut self, epoch: usize, scores: &[TaskScore], params: &ParamVector) {
        for (slot, &t) in self.best.iter_mut().zip(&self.tracked) {
            // rows replace the initial entry, later epochs only on strict improvement
            if slot.epoch == 0 || scores[t].accuracy > slot.dev_accuracy {
                slot.epoch = epoch;
                slot.dev_accuracy = scores[t].accuracy;
                slot.params = params.clone();
            }
        }
    }

    pub fn finish(self) -> Vec<BestSnapshot> {
        self.best
    }
}

pub(crate) fn row_from_scores(epoch: usize, train_loss: Vec<f64>, scores: &[TaskScore], target: usize) -> EpochRow {
    EpochRow {
        epoch,
        train_loss,
        dev_accuracy: scores.iter().map(|s| s.accuracy).collect(),
        dev_loss: scores.iter().map(|s| s.loss).collect(),
        target_dev_loss: scores[target].loss,
        alphas: Vec::new(),
        weights: Vec::new(),
        inner_attempts: 0,
    }
}

/// Each weight divided by the total.
pub fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}
