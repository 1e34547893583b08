//! Reference optimizers: SGD with classical or Nesterov momentum, and Adam.

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::error::{BfeError, Result};
use crate::param::{GradVector, ParamVector};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumConfig {
    pub eta: f64,
    pub beta: f64,
    #[serde(default)]
    pub nesterov: bool,
}

impl MomentumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(BfeError::InvalidConfig(format!("momentum eta must be positive, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(BfeError::InvalidConfig(format!("momentum beta must lie in [0, 1), got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            delta: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.delta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(BfeError::InvalidConfig(format!("invalid Adam configuration: {self:?}")))
        }
    }
}

fn finite_gradient<P: Problem + ?Sized>(problem: &P, theta: &ParamVector, batch: &Batch) -> Result<GradVector> {
    let g = problem.gradient(theta, batch);
    if g.is_finite() {
        Ok(g)
    } else {
        Err(BfeError::NonFinite { what: "gradient" })
    }
}

fn check_dims(theta: &ParamVector, dim: usize, others: &[&[f64]]) -> Result<()> {
    theta.ensure_dim(dim)?;
    for other in others {
        if other.len() != dim {
            return Err(BfeError::DimensionMismatch {
                expected: dim,
                actual: other.len(),
            });
        }
    }
    Ok(())
}

/// Heavy-ball step `v' = βv + g`, `θ' = θ − ηv'`. With `nesterov` the gradient is
/// taken at the look-ahead point `θ − ηβv`.
pub fn sgd_momentum_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    velocity: &[f64],
    cfg: &MomentumConfig,
) -> Result<(ParamVector, Vec<f64>)> {
    cfg.validate()?;
    check_dims(theta, problem.dimension(), &[velocity])?;
    let g = if cfg.nesterov {
        let look_ahead = ParamVector::new(
            theta
                .iter()
                .zip(velocity)
                .map(|(t, v)| t - cfg.eta * cfg.beta * v)
                .collect(),
        );
        finite_gradient(problem, &look_ahead, batch)?
    } else {
        finite_gradient(problem, theta, batch)?
    };
    let velocity: Vec<f64> = velocity
        .iter()
        .zip(g.iter())
        .map(|(v, g)| cfg.beta * v + g)
        .collect();
    let theta = ParamVector::new(
        theta
            .iter()
            .zip(&velocity)
            .map(|(t, v)| t - cfg.eta * v)
            .collect(),
    );
    Ok((theta, velocity))
}

/// Adam with bias correction. `t` is the 1-based step count.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    m: &[f64],
    v: &[f64],
    t: usize,
    cfg: &AdamConfig,
) -> Result<(ParamVector, Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if t == 0 {
        return Err(BfeError::InvalidConfig("Adam step count starts at 1".into()));
    }
    check_dims(theta, problem.dimension(), &[m, v])?;
    let g = finite_gradient(problem, theta, batch)?;
    let m: Vec<f64> = m
        .iter()
        .zip(g.iter())
        .map(|(m, g)| cfg.beta1 * m + (1.0 - cfg.beta1) * g)
        .collect();
    let v: Vec<f64> = v
        .iter()
        .zip(g.iter())
        .map(|(v, g)| cfg.beta2 * v + (1.0 - cfg.beta2) * g * g)
        .collect();
    let bias1 = 1.0 - cfg.beta1.powi(t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(t as i32);
    let theta = ParamVector::new(
        theta
            .iter()
            .zip(m.iter().zip(&v))
            .map(|(th, (m, v))| {
                let m_hat = m / bias1;
                let v_hat = v / bias2;
                th - cfg.alpha * m_hat / (v_hat.sqrt() + cfg.delta)
            })
            .collect(),
    );
    Ok((theta, m, v))
}
