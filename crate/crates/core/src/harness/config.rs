//! Experiment configuration: a flat `key=value` file with dotted sections.
//!
//! Values resolve in three layers: the scale preset, then the file, then
//! command-line overrides. Unknown keys are rejected.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datasets::{LabelColumn, TaskSpec};
use crate::error::{Error, Result};
use crate::model::{Init, TaskId};
use crate::weighting::{AvilConfig, DiwConfig, TrainConfig};

/// Training regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Singletask,
    Multitask,
    Diw,
    Avil,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Singletask, Method::Multitask, Method::Diw, Method::Avil];

    pub fn name(self) -> &'static str {
        match self {
            Method::Singletask => "singletask",
            Method::Multitask => "multitask",
            Method::Diw => "diw",
            Method::Avil => "avil",
        }
    }

    /// Whether the regime optimises for a single target task.
    pub fn has_target(self) -> bool {
        self != Method::Multitask
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}` (singletask|multitask|diw|avil)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// 10k training images, 20 epochs, 3 seeds.
    Desk,
    /// The whole 50k training pool, 100 epochs, 20 seeds.
    Full,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::config(format!("unknown scale `{other}` (desk|full)"))),
        }
    }
}

pub const DESK_MAX_SEEDS: usize = 5;

/// Where the data comes from and how it is split.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub mnist_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub pair_seed: u64,
    /// Keys the dev split and the training subset.
    pub split_seed: u64,
    pub dev_size: usize,
    /// Training subset size; `None` keeps the whole pool.
    pub train_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub target: TaskId,
    pub seeds: Vec<u64>,
    pub scale: Scale,
    pub out_dir: PathBuf,
    pub init: Init,
    pub train: TrainConfig,
    pub avil: AvilConfig,
    pub diw: DiwConfig,
    pub data: DataConfig,
}

/// Command-line overrides, applied after the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub target: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub scale: Option<Scale>,
}

impl ExperimentConfig {
    pub fn preset(scale: Scale) -> Self {
        let (train_size, epochs, seeds) = match scale {
            Scale::Desk => (Some(10_000), 20, vec![0, 1, 2]),
            Scale::Full => (None, 100, (0..20).collect()),
        };
        Self {
            method: Method::Avil,
            target: TaskId::new("tl"),
            seeds,
            scale,
            out_dir: PathBuf::from("runs"),
            init: Init::default(),
            train: TrainConfig {
                epochs,
                ..TrainConfig::default()
            },
            avil: AvilConfig::default(),
            diw: DiwConfig::default(),
            data: DataConfig {
                mnist_dir: PathBuf::from("data/mnist"),
                cache_dir: PathBuf::from("data/cache"),
                pair_seed: 0,
                split_seed: 0,
                dev_size: 10_000,
                train_size,
            },
        }
    }

    /// Parses config text on top of the preset named by `overrides.scale`,
    /// the file's `experiment.scale`, or `desk`.
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let file_scale = pairs
            .iter()
            .find(|(k, _, _)| k == "experiment.scale")
            .map(|(_, v, line)| v.parse::<Scale>().map_err(|e| at_line(*line, e)))
            .transpose()?;
        let scale = overrides.scale.or(file_scale).unwrap_or(Scale::Desk);
        let mut cfg = Self::preset(scale);
        for (key, value, line) in &pairs {
            cfg.set(key, value).map_err(|e| at_line(*line, e))?;
        }
        cfg.scale = scale;
        if let Some(m) = overrides.method {
            cfg.method = m;
        }
        if let Some(t) = &overrides.target {
            cfg.target = TaskId::new(t.clone());
        }
        if let Some(s) = &overrides.seeds {
            cfg.seeds = s.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "experiment.method" => self.method = v.parse()?,
            "experiment.target" => self.target = TaskId::new(v),
            "experiment.seeds" => self.seeds = parse_seeds(v)?,
            "experiment.scale" => self.scale = v.parse()?,
            "experiment.out_dir" => self.out_dir = PathBuf::from(v),
            "model.init" => self.init = Init::parse(v)?,
            "train.epochs" => self.train.epochs = num(key, v)?,
            "train.batch_size" => self.train.batch_size = num(key, v)?,
            "train.lr" => self.train.lr = num(key, v)?,
            "train.momentum" => self.train.momentum = num(key, v)?,
            "train.rho" => self.train.rho = num(key, v)?,
            "clamp.floor" => self.train.floor = num(key, v)?,
            "avil.s" => self.avil.alpha.steps = num(key, v)?,
            "avil.meta_lr" => self.avil.alpha.lr = num(key, v)?,
            "avil.meta_momentum" => self.avil.alpha.momentum = num(key, v)?,
            "avil.pin_alpha" => self.avil.pinned_alpha = num(key, v)?,
            "diw.eta_w" => self.diw.eta_w = num(key, v)?,
            "diw.patience" => self.diw.patience = num(key, v)?,
            "data.mnist_dir" => self.data.mnist_dir = PathBuf::from(v),
            "data.cache_dir" => self.data.cache_dir = PathBuf::from(v),
            "data.pair_seed" => self.data.pair_seed = num(key, v)?,
            "data.split_seed" => self.data.split_seed = num(key, v)?,
            "data.dev_size" => self.data.dev_size = num(key, v)?,
            "data.train_size" => {
                self.data.train_size = if v == "all" { None } else { Some(num(key, v)?) };
            }
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.train.epochs == 0 {
            return Err(Error::config("train.epochs must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }
        if self.scale == Scale::Desk && self.seeds.len() > DESK_MAX_SEEDS {
            return Err(Error::config(format!(
                "the desk preset allows at most {DESK_MAX_SEEDS} seeds, got {}",
                self.seeds.len()
            )));
        }
        if self.avil.alpha.steps == 0 {
            return Err(Error::config("avil.s must be at least 1"));
        }
        if !(self.avil.alpha.lr > 0.0) || !(0.0..1.0).contains(&self.avil.alpha.momentum) {
            return Err(Error::config("avil.meta_lr must be positive and avil.meta_momentum in [0, 1)"));
        }
        if !(self.diw.eta_w > 0.0) || self.diw.patience == 0 {
            return Err(Error::config("diw.eta_w and diw.patience must be positive"));
        }
        if self.data.dev_size == 0 || self.data.train_size == Some(0) {
            return Err(Error::config("data.dev_size and data.train_size must be positive"));
        }
        self.tasks()?;
        Ok(())
    }

    /// Task bindings the run trains on. Singletask trains only the target.
    pub fn tasks(&self) -> Result<Vec<TaskSpec>> {
        let all = multimnist_tasks();
        if self.method.has_target() && !all.iter().any(|t| t.id == self.target) {
            return Err(Error::config(format!(
                "unknown target task `{}` (tl|br)",
                self.target
            )));
        }
        Ok(match self.method {
            Method::Singletask => all.into_iter().filter(|t| t.id == self.target).collect(),
            _ => all,
        })
    }

    /// Directory name for this run under `out_dir`.
    pub fn run_name(&self) -> String {
        if self.method.has_target() {
            format!("{}-{}", self.method, self.target)
        } else {
            self.method.to_string()
        }
    }

    /// Every key with its resolved value, in a stable order. Parsing the
    /// output reproduces the configuration.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let train_size = self.data.train_size.map_or("all".to_string(), |n| n.to_string());
        let entries: [(&str, String); 24] = [
            ("experiment.method", self.method.to_string()),
            ("experiment.target", self.target.to_string()),
            ("experiment.seeds", seeds.join(",")),
            ("experiment.scale", self.scale.name().to_string()),
            ("experiment.out_dir", self.out_dir.display().to_string()),
            ("model.init", self.init.name().to_string()),
            ("train.epochs", self.train.epochs.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.lr", self.train.lr.to_string()),
            ("train.momentum", self.train.momentum.to_string()),
            ("train.rho", self.train.rho.to_string()),
            ("clamp.floor", self.train.floor.to_string()),
            ("avil.s", self.avil.alpha.steps.to_string()),
            ("avil.meta_lr", self.avil.alpha.lr.to_string()),
            ("avil.meta_momentum", self.avil.alpha.momentum.to_string()),
            ("avil.pin_alpha", self.avil.pinned_alpha.to_string()),
            ("diw.eta_w", self.diw.eta_w.to_string()),
            ("diw.patience", self.diw.patience.to_string()),
            ("data.mnist_dir", self.data.mnist_dir.display().to_string()),
            ("data.cache_dir", self.data.cache_dir.display().to_string()),
            ("data.pair_seed", self.data.pair_seed.to_string()),
            ("data.split_seed", self.data.split_seed.to_string()),
            ("data.dev_size", self.data.dev_size.to_string()),
            ("data.train_size", train_size),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

/// The two MultiMNIST tasks: `tl` (top-left digit) and `br` (bottom-right).
pub fn multimnist_tasks() -> Vec<TaskSpec> {
    vec![
        TaskSpec::new("tl", LabelColumn::TopLeft),
        TaskSpec::new("br", LabelColumn::BottomRight),
    ]
}

pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::config(format!("bad seed `{}` in `{v}`", s.trim())))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("cannot parse `{v}` for `{key}`")))
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("line {line}: {msg}")),
        other => other,
    }
}

/// `(key, value, line)` triples; blank lines and `#` comments are skipped.
fn parse_pairs(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        let key = k.trim().to_string();
        if out.iter().any(|(seen, _, _)| *seen == key) {
            return Err(Error::config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
        out.push((key, v.trim().to_string(), i + 1));
    }
    Ok(out)
}
