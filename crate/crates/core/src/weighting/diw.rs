//! Discriminative importance weighting: reweight-and-retrain until the
//! jointly trained model improves the target's dev accuracy.

use super::{
    dev_scores, epoch_batches, fresh_sgd, normalized, per_task, row_from_scores, train_pass, BestTracker,
    DiwConfig, Observer, TaskData, Term, TrainConfig, TrainOutcome,
};
use crate::error::{Error, Result};
use crate::model::{ParamVector, TaskId, TaskModel};
use crate::optim::clamp_weights;

struct Candidate {
    accuracy: f64,
    params: ParamVector,
    train_loss: Vec<f64>,
}

/// Per epoch, from the base θ:
/// 1. each task trains alone for one unweighted pass; its target dev
///    accuracy is `a_i`;
/// 2. a joint pass with losses scaled by `w_i / Σw` gives `a_joint`. If
///    `a_joint` beats the best accuracy so far the pass is kept; otherwise
///    `w_i ← clamp(w_i + η·(a_i − a_joint))`, θ is restored and the joint
///    pass retried, at most `patience` times. When every attempt fails the
///    best attempt is kept.
pub fn diw_train<M: TaskModel>(
    model: &mut M,
    data: &TaskData<'_>,
    target: &TaskId,
    cfg: &TrainConfig,
    diw: &DiwConfig,
    observer: &mut dyn Observer,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.check_model(model)?;
    if diw.patience == 0 {
        return Err(Error::config("DIW patience must be at least 1"));
    }
    let t = data.target_index(target)?;
    let n = data.tasks.len();
    let mut weights = vec![1.0f64; n];

    let init = model.snapshot();
    let init_scores = dev_scores(model, data)?;
    let mut best_so_far = init_scores[t].accuracy;
    let mut best = BestTracker::new(data.tasks, vec![t], &init, &init_scores);
    let mut rows = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let base = model.snapshot();
        let single = per_task(model, n, cfg.workers, |i, m| {
            let spec = &data.tasks[i];
            let b = epoch_batches(data.train.len(), spec, cfg, epoch)?;
            m.restore(&base)?;
            let mut sgd = fresh_sgd(m, cfg)?;
            let terms = [Term {
                task: i,
                spec,
                weight: 1.0,
            }];
            train_pass(m, &mut sgd, data.train, &b, &terms, epoch)?;
            Ok(dev_scores(m, data)?[t].accuracy)
        })?;

        let joint_batches = epoch_batches(data.train.len(), &data.tasks[0], cfg, epoch)?;
        let mut chosen: Option<Candidate> = None;
        let mut attempts = 0;
        let mut accepted = false;
        while attempts < diw.patience {
            attempts += 1;
            model.restore(&base)?;
            let w_norm = normalized(&weights);
            let terms: Vec<Term<'_>> = data
                .tasks
                .iter()
                .enumerate()
                .map(|(task, spec)| Term {
                    task,
                    spec,
                    weight: w_norm[task],
                })
                .collect();
            let mut sgd = fresh_sgd(model, cfg)?;
            let train_loss = train_pass(model, &mut sgd, data.train, &joint_batches, &terms, epoch)?;
            let a_joint = dev_scores(model, data)?[t].accuracy;
            accepted = a_joint > best_so_far;
            observer.diw_attempt(epoch, attempts, &weights, a_joint, accepted);
            if chosen.as_ref().map_or(true, |c| a_joint > c.accuracy) {
                chosen = Some(Candidate {
                    accuracy: a_joint,
                    params: model.snapshot(),
                    train_loss,
                });
            }
            if accepted {
                break;
            }
            let moved: Vec<f64> = weights
                .iter()
                .zip(&single)
                .map(|(w, a_i)| w + diw.eta_w * (a_i - a_joint))
                .collect();
            weights = clamp_weights(&moved, cfg.floor);
        }

        let pick = chosen.expect("at least one attempt");
        if accepted {
            best_so_far = pick.accuracy;
        }
        model.restore(&pick.params)?;
        let scores = dev_scores(model, data)?;
        let mut row = row_from_scores(epoch, pick.train_loss, &scores, t);
        row.weights = weights.clone();
        row.inner_attempts = attempts;
        best.observe(epoch, &scores, &pick.params);
        observer.epoch_finished(&row, &pick.params);
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
