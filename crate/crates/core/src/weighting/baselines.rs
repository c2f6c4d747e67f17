//! Singletask and uniform multitask training.

use super::{
    dev_scores, epoch_batches, fresh_sgd, row_from_scores, train_pass, BestTracker, Observer, TaskData, Term,
    TrainConfig, TrainOutcome,
};
use crate::error::{Error, Result};
use crate::model::TaskModel;

/// Plain mini-batch SGD on a single-head model.
pub fn singletask_train<M: TaskModel>(
    model: &mut M,
    data: &TaskData<'_>,
    cfg: &TrainConfig,
    observer: &mut dyn Observer,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.check_model(model)?;
    if data.tasks.len() != 1 {
        return Err(Error::config(format!(
            "singletask training needs exactly one task, got {}",
            data.tasks.len()
        )));
    }
    let spec = &data.tasks[0];
    let terms = [Term {
        task: 0,
        spec,
        weight: 1.0,
    }];
    let init = model.snapshot();
    let mut best = BestTracker::new(data.tasks, vec![0], &init, &dev_scores(model, data)?);
    let mut rows = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let b = epoch_batches(data.train.len(), spec, cfg, epoch)?;
        let mut sgd = fresh_sgd(model, cfg)?;
        let train_loss = train_pass(model, &mut sgd, data.train, &b, &terms, epoch)?;
        let scores = dev_scores(model, data)?;
        let row = row_from_scores(epoch, train_loss, &scores, 0);
        let params = model.snapshot();
        best.observe(epoch, &scores, &params);
        observer.epoch_finished(&row, &params);
        rows.push(row);
    }
    Ok(TrainOutcome {
        tasks: vec![spec.id.clone()],
        rows,
        best: best.finish(),
        final_params: model.snapshot(),
        final_weights: Vec::new(),
    })
}

/// Joint training on the shared input with the per-task losses averaged.
/// Keeps a best snapshot for every task. The row's `target_dev_loss` is the
/// mean dev loss over tasks.
pub fn multitask_train<M: TaskModel>(
    model: &mut M,
    data: &TaskData<'_>,
    cfg: &TrainConfig,
    observer: &mut dyn Observer,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.check_model(model)?;
    let n = data.tasks.len();
    if n < 2 {
        return Err(Error::config("multitask training needs at least two tasks"));
    }
    let share = 1.0 / n as f64;
    let terms: Vec<Term<'_>> = data
        .tasks
        .iter()
        .enumerate()
        .map(|(task, spec)| Term {
            task,
            spec,
            weight: share,
        })
        .collect();
    let init = model.snapshot();
    let mut best = BestTracker::new(data.tasks, (0..n).collect(), &init, &dev_scores(model, data)?);
    let mut rows = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let b = epoch_batches(data.train.len(), &data.tasks[0], cfg, epoch)?;
        let mut sgd = fresh_sgd(model, cfg)?;
        let train_loss = train_pass(model, &mut sgd, data.train, &b, &terms, epoch)?;
        let scores = dev_scores(model, data)?;
        let mut row = row_from_scores(epoch, train_loss, &scores, 0);
        row.target_dev_loss = row.dev_loss.iter().sum::<f64>() * share;
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
        final_weights: Vec::new(),
    })
}
