//! Multitask training with learned task-interpolation weights: a small
//! reverse-mode autodiff engine, a shared-encoder CNN with per-task heads,
//! MultiMNIST data tooling and the experiment harness.

pub mod datasets;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod weighting;

pub use error::{Error, Result};
