use crate::batch::Batch;
use crate::error::{BfeError, Result};
use crate::param::{GradVector, ParamVector};

/// A differentiable loss over a parameter vector and a data batch.
///
/// Implementations must be deterministic in `(theta, batch)`.
pub trait Problem: Send + Sync {
    fn dimension(&self) -> usize;

    fn loss(&self, theta: &ParamVector, batch: &Batch) -> f64;

    fn gradient(&self, theta: &ParamVector, batch: &Batch) -> GradVector;
}

/// Central-difference gradient, `(f(θ + h e_i) - f(θ - h e_i)) / 2h` per coordinate.
///
/// Used as a correctness oracle for the analytic gradients.
pub fn finite_difference_gradient<P: Problem + ?Sized>(
    problem: &P,
    theta: &ParamVector,
    batch: &Batch,
    h: f64,
) -> Result<GradVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(BfeError::InvalidConfig(format!("step h must be positive, got {h}")));
    }
    if !theta.is_finite() {
        return Err(BfeError::NonFinite { what: "parameter" });
    }
    let mut grad = Vec::with_capacity(theta.dim());
    for i in 0..theta.dim() {
        let up = problem.loss(&theta.with_coordinate(i, theta[i] + h), batch);
        let down = problem.loss(&theta.with_coordinate(i, theta[i] - h), batch);
        if !up.is_finite() || !down.is_finite() {
            return Err(BfeError::NonFiniteProbe { coordinate: i });
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(GradVector::new(grad))
}
