//! The αVIL epoch loop.

use super::{
    collect_delta, dev_scores, epoch_batches, normalized, per_task, row_from_scores, tune_alphas, AvilConfig,
    BestTracker, Observer, TargetDevLoss, TaskData, TrainConfig, TrainOutcome,
};
use crate::error::{Error, Result};
use crate::model::{combine, TaskId, TaskModel};
use crate::optim::clamp_weights;

/// `clamp(w + (α − 1), floor)` element-wise.
pub fn update_weights(weights: &[f64], alphas: &[f64], floor: f64) -> Vec<f64> {
    let moved: Vec<f64> = weights.iter().zip(alphas).map(|(w, a)| w + (a - 1.0)).collect();
    clamp_weights(&moved, floor)
}

/// Per epoch: collect each task's delta from the shared base with its loss
/// scaled by `w_i / Σw`, tune α on the target dev loss, write back
/// `θ + Σ αᵢ δᵢ`, then move each weight by `αᵢ − 1`.
pub fn avil_train<M: TaskModel>(
    model: &mut M,
    data: &TaskData<'_>,
    target: &TaskId,
    cfg: &TrainConfig,
    avil: &AvilConfig,
    observer: &mut dyn Observer,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.check_model(model)?;
    let t = data.target_index(target)?;
    let n_tasks = data.tasks.len();
    let mut weights = vec![1.0f64; n_tasks];

    let init = model.snapshot();
    let mut best = BestTracker::new(data.tasks, vec![t], &init, &dev_scores(model, data)?);
    let mut rows = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let base = model.snapshot();
        let w_norm = normalized(&weights);
        let collected = per_task(model, n_tasks, cfg.workers, |i, m| {
            let spec = &data.tasks[i];
            let b = epoch_batches(data.train.len(), spec, cfg, epoch)?;
            m.restore(&base)?;
            collect_delta(m, &base, i, spec, w_norm[i], data.train, &b, cfg, epoch)
        })?;
        let (deltas, train_loss): (Vec<_>, Vec<_>) = collected.into_iter().unzip();
        observer.deltas_collected(epoch, &deltas, &w_norm);

        let alphas = if avil.pinned_alpha {
            vec![1.0; n_tasks]
        } else {
            observer.tuning_started(epoch, &vec![1.0; n_tasks]);
            let mut objective = TargetDevLoss::new(model, data.dev, t, &data.tasks[t])?;
            let mut finite = true;
            let trace = tune_alphas(&base, &deltas, &mut objective, &avil.alpha, |s, a, g, l| {
                finite &= l.is_finite() && g.iter().all(|v| v.is_finite());
                observer.alpha_step(epoch, s, a, g, l);
            })?;
            if !finite || trace.alphas.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite { epoch });
            }
            trace.alphas
        };

        let theta = combine(&base, &deltas, &alphas)?;
        model.restore(&theta)?;
        weights = update_weights(&weights, &alphas, cfg.floor);

        let scores = dev_scores(model, data)?;
        if !scores[t].loss.is_finite() {
            return Err(Error::NonFinite { epoch });
        }
        let mut row = row_from_scores(epoch, train_loss, &scores, t);
        row.alphas = alphas;
        row.weights = weights.clone();
        let params = model.snapshot();
        best.observe(epoch, &scores, &params);
        observer.epoch_finished(&row, &params);
        rows.push(row);
    }

    Ok(TrainOutcome {
        tasks: data.tasks.iter().map(|s| s.id.clone()).collect(),
        rows,
        best: best.finish(),
        final_params: model.snapshot(),
        final_weights: weights,
    })
}
