use crate::error::{Error, Result};

/// Flat view of every model parameter in canonical layout order.
///
/// Values are held in double precision so that snapshots of single-precision
/// models round-trip exactly and delta arithmetic loses nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::config(format!(
                "parameter vector length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    /// `self - base`.
    pub fn delta_from(&self, base: &Self) -> Result<Self> {
        self.check_len(base)?;
        Ok(Self(
            self.0.iter().zip(&base.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `base + Σ alphas[i] · deltas[i]`, accumulated in list order.
pub fn combine(base: &ParamVector, deltas: &[ParamVector], alphas: &[f64]) -> Result<ParamVector> {
    if deltas.len() != alphas.len() {
        return Err(Error::config(format!(
            "{} deltas but {} mixing coefficients",
            deltas.len(),
            alphas.len()
        )));
    }
    for d in deltas {
        base.check_len(d)?;
    }
    let mut out = base.0.clone();
    for (j, v) in out.iter_mut().enumerate() {
        for (d, &a) in deltas.iter().zip(alphas) {
            *v += a * d.0[j];
        }
    }
    Ok(ParamVector(out))
}
