//! Dev/test evaluation: accuracy and mean cross-entropy per task.

use crate::datasets::{MultiMnistSet, SampleBatch, TaskSpec};
use crate::error::{Error, Result};
use crate::model::TaskModel;
use crate::tensor::Real;

/// Images per forward pass during evaluation.
pub const EVAL_CHUNK: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskScore {
    pub accuracy: f64,
    pub loss: f64,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy_from_logits<T: Real>(logits: &[T], classes: usize, labels: &[usize]) -> f64 {
    let correct = logits
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    correct as f64 / labels.len() as f64
}

fn row_loss<T: Real>(row: &[T], label: usize) -> f64 {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(Real::to_f64(v)));
    let denom: f64 = row.iter().map(|&v| (Real::to_f64(v) - m).exp()).sum();
    (m - Real::to_f64(row[label])) + denom.ln()
}

/// Scores every task of `model` on `set`. `tasks[i]` binds the model's
/// i-th head to a label column.
pub fn evaluate<M: TaskModel>(model: &M, set: &MultiMnistSet, tasks: &[TaskSpec]) -> Result<Vec<TaskScore>> {
    if set.is_empty() {
        return Err(Error::config("cannot evaluate on an empty set"));
    }
    if tasks.len() != model.task_ids().len() {
        return Err(Error::config(format!(
            "{} task bindings for a model with {} heads",
            tasks.len(),
            model.task_ids().len()
        )));
    }
    let mut correct = vec![0usize; tasks.len()];
    let mut loss = vec![0.0f64; tasks.len()];
    let mut start = 0;
    while start < set.len() {
        let end = (start + EVAL_CHUNK).min(set.len());
        let batch = SampleBatch::<M::Scalar>::range(set, start, end)?;
        let logits = model.all_logits(&batch.images)?;
        for (t, (spec, z)) in tasks.iter().zip(&logits).enumerate() {
            let classes = z.shape()[1];
            for (row, &y) in z.data().chunks_exact(classes).zip(batch.labels(spec.column)) {
                if argmax(row) == y {
                    correct[t] += 1;
                }
                loss[t] += row_loss(row, y);
            }
        }
        start = end;
    }
    let n = set.len() as f64;
    Ok(correct
        .iter()
        .zip(&loss)
        .map(|(&c, &l)| TaskScore {
            accuracy: c as f64 / n,
            loss: l / n,
        })
        .collect())
}

/// Accuracy of one task.
pub fn evaluate_accuracy<M: TaskModel>(model: &M, set: &MultiMnistSet, tasks: &[TaskSpec], task: usize) -> Result<f64> {
    let scores = evaluate(model, set, tasks)?;
    scores
        .get(task)
        .map(|s| s.accuracy)
        .ok_or_else(|| Error::argument(format!("task index {task} out of range")))
}
