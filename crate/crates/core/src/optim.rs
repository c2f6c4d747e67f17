//! Classic momentum SGD and the task-weight clamp.

use crate::error::{Error, Result};
use crate::tensor::Real;

/// Lower bound applied to task weights after every update.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Heavy-ball SGD without dampening, Nesterov or weight decay:
/// `v <- momentum * v + g; p <- p - lr * v`.
#[derive(Clone, Debug)]
pub struct SgdState<T> {
    learning_rate: T,
    momentum: T,
    velocity: Vec<T>,
}

impl<T: Real> SgdState<T> {
    pub fn new(learning_rate: f64, momentum: f64, len: usize) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            learning_rate: T::from_f64(learning_rate),
            momentum: T::from_f64(momentum),
            velocity: vec![T::zero(); len],
        })
    }

    pub fn velocity(&self) -> &[T] {
        &self.velocity
    }

    /// Zeroes the velocity buffer.
    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::config(format!(
                "sgd step over {} params with {} grads, state sized {}",
                params.len(),
                grads.len(),
                self.velocity.len()
            )));
        }
        for ((p, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            *v = self.momentum * *v + g;
            *p = *p - self.learning_rate * *v;
        }
        Ok(())
    }
}

/// Element-wise `max(w, floor)`.
pub fn clamp_weights(w: &[f64], floor: f64) -> Vec<f64> {
    w.iter().map(|&v| v.max(floor)).collect()
}
