use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{BfeError, Result};

/// Dense parameter vector, the optimization variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

/// Gradient of a loss at some parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self - eta * grad`, elementwise.
    pub fn descend(&self, eta: f64, grad: &GradVector) -> ParamVector {
        debug_assert_eq!(self.dim(), grad.dim());
        ParamVector(
            self.0
                .iter()
                .zip(grad.as_slice())
                .map(|(t, g)| t - eta * g)
                .collect(),
        )
    }

    /// Copy of `self` with one coordinate moved by `-eta * g`.
    pub fn descend_coordinate(&self, coordinate: usize, eta: f64, g: f64) -> ParamVector {
        let mut out = self.clone();
        out.0[coordinate] = self.0[coordinate] - eta * g;
        out
    }

    pub fn with_coordinate(&self, coordinate: usize, value: f64) -> ParamVector {
        let mut out = self.clone();
        out.0[coordinate] = value;
        out
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(BfeError::DimensionMismatch {
                expected,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

impl GradVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for GradVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Index<usize> for GradVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl From<Vec<f64>> for GradVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}
