//! Multi-seed execution of one configured regime.
//!
//! Layout of a run directory `<out_dir>/<run name>/`:
//! `config.txt` (resolved configuration), `summary.csv` (best snapshot per
//! seed and task), `aggregate.csv` (min/max/mean/population std over
//! completed seeds) and `seed-<s>/` holding `epochs.csv` plus one
//! `best-<task>.ckpt` per tracked task.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::{DataConfig, ExperimentConfig, Method};
use super::csvio::{fmt_f64, CsvOut};
use super::eval::evaluate_accuracy;
use crate::datasets::{
    cache_path, load_mnist_dir, make_multimnist, read_cache, split_dev, subset_indices, write_cache, MultiMnistSet,
    Split, TaskSpec,
};
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, MultiHeadModel, ParamVector, TaskId, TaskModel};
use crate::weighting::{
    avil_train, diw_train, multitask_train, singletask_train, EpochRow, Observer, TaskData, TrainConfig,
    TrainOutcome,
};

pub struct ExperimentData {
    pub train: MultiMnistSet,
    pub dev: MultiMnistSet,
    pub test: MultiMnistSet,
}

/// Renders the train pool and test set from raw MNIST and writes both
/// caches under `out`. Returns the cache paths.
pub fn generate(mnist_dir: &Path, out: &Path, pair_seed: u64) -> Result<[PathBuf; 2]> {
    let (train, test) = load_mnist_dir(mnist_dir)?;
    let mut paths = Vec::with_capacity(2);
    for (raw, split) in [(&train, Split::Train), (&test, Split::Test)] {
        let set = make_multimnist(raw, pair_seed, split)?;
        let path = cache_path(out, split, pair_seed);
        write_cache(&path, &set)?;
        paths.push(path);
    }
    Ok([paths[0].clone(), paths[1].clone()])
}

/// Reads the cached MultiMNIST sets, generating them first when absent, then
/// splits off the dev set and draws the training subset.
pub fn prepare_data(cfg: &DataConfig) -> Result<ExperimentData> {
    let train_path = cache_path(&cfg.cache_dir, Split::Train, cfg.pair_seed);
    let test_path = cache_path(&cfg.cache_dir, Split::Test, cfg.pair_seed);
    if !train_path.is_file() || !test_path.is_file() {
        generate(&cfg.mnist_dir, &cfg.cache_dir, cfg.pair_seed)?;
    }
    let pool = read_cache(&train_path, Split::Train)?;
    let test = read_cache(&test_path, Split::Test)?;
    let (mut train, dev) = split_dev(&pool, cfg.dev_size, cfg.split_seed)?;
    if let Some(n) = cfg.train_size {
        train = train.subset(&subset_indices(train.len(), n, cfg.split_seed)?, Split::Train);
    }
    Ok(ExperimentData { train, dev, test })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskResult {
    pub task: TaskId,
    /// 0 means the initial parameters were never beaten.
    pub best_epoch: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeedStatus {
    Completed(Vec<TaskResult>),
    /// Aborted on a non-finite loss; excluded from aggregates.
    Failed { epoch: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<EpochRow>,
    pub status: SeedStatus,
}

/// Min, max, mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Stats {
        n: values.len(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
    })
}

/// Accuracy statistics for one task, in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub task: TaskId,
    pub dev: Option<Stats>,
    pub test: Option<Stats>,
    pub failed: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub dir: PathBuf,
    pub method: Method,
    pub target: Option<TaskId>,
    pub seeds: Vec<SeedRun>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate_for(&self, task: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.task.as_str() == task)
    }
}

/// Prints one line per epoch to stderr and keeps the rows.
struct Progress<'a> {
    label: &'a str,
    seed: u64,
    rows: Vec<EpochRow>,
    quiet: bool,
}

impl Observer for Progress<'_> {
    fn epoch_finished(&mut self, row: &EpochRow, _: &ParamVector) {
        if !self.quiet {
            let acc: Vec<String> = row.dev_accuracy.iter().map(|a| format!("{:.2}", a * 100.0)).collect();
            eprintln!(
                "[{} seed {}] epoch {} dev acc [{}] target dev loss {:.4}",
                self.label,
                self.seed,
                row.epoch,
                acc.join(", "),
                row.target_dev_loss
            );
        }
        self.rows.push(row.clone());
    }
}

/// Runs every seed of `cfg` and writes the run directory. `workers` caps the
/// parallel delta-collection workers; results do not depend on it.
pub fn run_experiment(cfg: &ExperimentConfig, data: &ExperimentData, workers: usize, quiet: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let tasks = cfg.tasks()?;
    let ids: Vec<TaskId> = tasks.iter().map(|t| t.id.clone()).collect();
    let name = cfg.run_name();
    let dir = cfg.out_dir.join(&name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    let task_data = TaskData {
        tasks: &tasks,
        train: &data.train,
        dev: &data.dev,
    };

    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let train = TrainConfig {
            seed,
            workers: workers.max(1),
            ..cfg.train.clone()
        };
        let mut model = MultiHeadModel::<f32>::with_init(&ids, seed, cfg.init)?;
        let mut progress = Progress {
            label: &name,
            seed,
            rows: Vec::new(),
            quiet,
        };
        let outcome = match cfg.method {
            Method::Singletask => singletask_train(&mut model, &task_data, &train, &mut progress),
            Method::Multitask => multitask_train(&mut model, &task_data, &train, &mut progress),
            Method::Diw => diw_train(&mut model, &task_data, &cfg.target, &train, &cfg.diw, &mut progress),
            Method::Avil => avil_train(&mut model, &task_data, &cfg.target, &train, &cfg.avil, &mut progress),
        };
        let seed_dir = dir.join(format!("seed-{seed}"));
        fs::create_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
        let status = match outcome {
            Ok(out) => SeedStatus::Completed(finish_seed(&mut model, &out, &tasks, &data.test, &seed_dir)?),
            Err(Error::NonFinite { epoch }) => SeedStatus::Failed { epoch },
            Err(e) => return Err(e),
        };
        write_epochs(&seed_dir.join("epochs.csv"), cfg.method, &ids, &progress.rows)?;
        seeds.push(SeedRun {
            seed,
            rows: progress.rows,
            status,
        });
    }

    let reported: Vec<TaskId> = match cfg.method {
        Method::Multitask => ids.clone(),
        _ => vec![cfg.target.clone()],
    };
    let aggregates = reported.iter().map(|t| aggregate(t, &seeds)).collect::<Vec<_>>();
    let report = ExperimentReport {
        name,
        dir,
        method: cfg.method,
        target: cfg.method.has_target().then(|| cfg.target.clone()),
        seeds,
        aggregates,
    };
    write_summary(&report)?;
    write_aggregate(&report)?;
    Ok(report)
}

/// Saves the best checkpoints and scores each one on the test set, once.
fn finish_seed(
    model: &mut MultiHeadModel<f32>,
    out: &TrainOutcome,
    tasks: &[TaskSpec],
    test: &MultiMnistSet,
    seed_dir: &Path,
) -> Result<Vec<TaskResult>> {
    let mut results = Vec::with_capacity(out.best.len());
    for best in &out.best {
        let index = model.task_index(&best.task)?;
        model.restore(&best.params)?;
        let test_accuracy = evaluate_accuracy(model, test, tasks, index)?;
        save_checkpoint(
            &seed_dir.join(format!("best-{}.ckpt", best.task)),
            model.task_ids(),
            &best.params,
        )?;
        results.push(TaskResult {
            task: best.task.clone(),
            best_epoch: best.epoch,
            dev_accuracy: best.dev_accuracy,
            test_accuracy,
        });
    }
    Ok(results)
}

fn aggregate(task: &TaskId, seeds: &[SeedRun]) -> Aggregate {
    let mut dev = Vec::new();
    let mut test = Vec::new();
    let mut failed = Vec::new();
    for run in seeds {
        match &run.status {
            SeedStatus::Completed(results) => {
                if let Some(r) = results.iter().find(|r| &r.task == task) {
                    dev.push(r.dev_accuracy * 100.0);
                    test.push(r.test_accuracy * 100.0);
                }
            }
            SeedStatus::Failed { .. } => failed.push(run.seed),
        }
    }
    Aggregate {
        task: task.clone(),
        dev: summarize(&dev),
        test: summarize(&test),
        failed,
    }
}

/// Header of a per-seed `epochs.csv`. Columns carrying α, weights or
/// attempt counts appear only for the regimes that produce them.
pub fn epoch_header(method: Method, ids: &[TaskId]) -> Vec<String> {
    let mut h = vec!["epoch".to_string()];
    for prefix in ["train_loss", "dev_accuracy", "dev_loss"] {
        h.extend(ids.iter().map(|t| format!("{prefix}_{t}")));
    }
    h.push("target_dev_loss".into());
    if method == Method::Avil {
        h.extend(ids.iter().map(|t| format!("alpha_{t}")));
    }
    if matches!(method, Method::Avil | Method::Diw) {
        h.extend(ids.iter().map(|t| format!("weight_{t}")));
    }
    if method == Method::Diw {
        h.push("inner_attempts".into());
    }
    h
}

fn write_epochs(path: &Path, method: Method, ids: &[TaskId], rows: &[EpochRow]) -> Result<()> {
    let mut out = CsvOut::create(path)?;
    out.row(&epoch_header(method, ids))?;
    for r in rows {
        let mut rec = vec![r.epoch.to_string()];
        for v in [&r.train_loss, &r.dev_accuracy, &r.dev_loss] {
            rec.extend(v.iter().copied().map(fmt_f64));
        }
        rec.push(fmt_f64(r.target_dev_loss));
        if method == Method::Avil {
            rec.extend(r.alphas.iter().copied().map(fmt_f64));
        }
        if matches!(method, Method::Avil | Method::Diw) {
            rec.extend(r.weights.iter().copied().map(fmt_f64));
        }
        if method == Method::Diw {
            rec.push(r.inner_attempts.to_string());
        }
        out.row(&rec)?;
    }
    out.finish()
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "method",
    "target",
    "seed",
    "status",
    "task",
    "best_epoch",
    "dev_accuracy_pct",
    "test_accuracy_pct",
    "failed_epoch",
];

fn write_summary(report: &ExperimentReport) -> Result<()> {
    let mut out = CsvOut::create(&report.dir.join("summary.csv"))?;
    out.row(&SUMMARY_HEADER)?;
    let target = report.target.as_ref().map_or(String::new(), |t| t.to_string());
    for run in &report.seeds {
        let head = [report.method.to_string(), target.clone(), run.seed.to_string()];
        match &run.status {
            SeedStatus::Completed(results) => {
                for r in results {
                    let mut rec = head.to_vec();
                    rec.extend([
                        "ok".to_string(),
                        r.task.to_string(),
                        r.best_epoch.to_string(),
                        fmt_f64(r.dev_accuracy * 100.0),
                        fmt_f64(r.test_accuracy * 100.0),
                        String::new(),
                    ]);
                    out.row(&rec)?;
                }
            }
            SeedStatus::Failed { epoch } => {
                let mut rec = head.to_vec();
                rec.extend(["failed".to_string(), String::new(), String::new(), String::new(), String::new(), epoch.to_string()]);
                out.row(&rec)?;
            }
        }
    }
    out.finish()
}

pub const AGGREGATE_HEADER: [&str; 14] = [
    "method",
    "target",
    "task",
    "seeds",
    "dev_min",
    "dev_max",
    "dev_mean",
    "dev_std_population",
    "test_min",
    "test_max",
    "test_mean",
    "test_std_population",
    "failed_seeds",
    "unit",
];

/// Formats `[min, max, mean, std]`, or blanks when no seed completed.
pub fn stats_fields(s: Option<Stats>) -> [String; 4] {
    match s {
        Some(s) => [fmt_f64(s.min), fmt_f64(s.max), fmt_f64(s.mean), fmt_f64(s.std)],
        None => Default::default(),
    }
}

fn write_aggregate(report: &ExperimentReport) -> Result<()> {
    let mut out = CsvOut::create(&report.dir.join("aggregate.csv"))?;
    out.row(&AGGREGATE_HEADER)?;
    let target = report.target.as_ref().map_or(String::new(), |t| t.to_string());
    for a in &report.aggregates {
        let failed: Vec<String> = a.failed.iter().map(u64::to_string).collect();
        let mut rec = vec![
            report.method.to_string(),
            target.clone(),
            a.task.to_string(),
            a.dev.map_or(0, |s| s.n).to_string(),
        ];
        rec.extend(stats_fields(a.dev));
        rec.extend(stats_fields(a.test));
        rec.push(failed.join(";"));
        rec.push("percent".into());
        out.row(&rec)?;
    }
    out.finish()
}
