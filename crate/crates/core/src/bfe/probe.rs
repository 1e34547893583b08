use crate::batch::Batch;
use crate::bfe::{Carried, ToleranceRule};
use crate::error::{BfeError, Result};
use crate::param::{GradVector, ParamVector};
use crate::problem::Problem;

/// Outcome of one forward-exploration probe.
///
/// `chain` holds the sequential sub-step points θ⁺, θ′ (and θ# for m = 3, ...);
/// its last entry is the end of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub theta_star: ParamVector,
    pub chain: Vec<ParamVector>,
    pub loss1: f64,
    pub loss2: f64,
    pub eps_comp: f64,
    pub eps_val: f64,
}

impl ProbeResult {
    pub fn theta_plus(&self) -> &ParamVector {
        &self.chain[0]
    }

    pub fn theta_prime(&self) -> &ParamVector {
        &self.chain[1]
    }

    pub fn theta_hash(&self) -> Option<&ParamVector> {
        self.chain.get(2)
    }

    pub fn chain_end(&self) -> &ParamVector {
        self.chain.last().expect("chain has at least two points")
    }

    pub fn passed(&self) -> bool {
        !self.carried().violated()
    }

    pub fn carried(&self) -> Carried {
        Carried {
            eps_comp: self.eps_comp,
            eps_val: self.eps_val,
        }
    }
}

/// Parameters shared by every probe within one step.
#[derive(Clone, Copy)]
pub(crate) struct ProbeCtx<'a, P: ?Sized> {
    pub problem: &'a P,
    pub batch: &'a Batch,
    pub tolerance: ToleranceRule,
    pub t: usize,
    pub factor: u32,
}

impl<P: Problem + ?Sized> ProbeCtx<'_, P> {
    /// `m` sequential steps of `sub` starting from `theta` (whose gradient is `grad`).
    fn chain(&self, theta: &ParamVector, grad: &GradVector, sub: f64) -> Result<Vec<ParamVector>> {
        let mut chain = Vec::with_capacity(self.factor as usize);
        let mut point = theta.descend(sub, grad);
        for _ in 1..self.factor {
            let g = self.problem.gradient(&point, self.batch);
            if !g.is_finite() {
                return Err(BfeError::NonFinite { what: "probe gradient" });
            }
            let next = point.descend(sub, &g);
            chain.push(point);
            point = next;
        }
        chain.push(point);
        Ok(chain)
    }

    fn finish(
        &self,
        theta_star: ParamVector,
        chain: Vec<ParamVector>,
        loss1: f64,
        loss2: f64,
    ) -> Result<ProbeResult> {
        if !loss1.is_finite() || !loss2.is_finite() {
            return Err(BfeError::NonFinite { what: "probe loss" });
        }
        Ok(ProbeResult {
            theta_star,
            chain,
            loss1,
            loss2,
            eps_comp: (loss2 - loss1).abs(),
            eps_val: self.tolerance.evaluate(loss1, loss2, self.t),
        })
    }

    /// θ* = θ − η g against `m` sub-steps of η/m; loss1 at θ*, loss2 at the chain end.
    pub fn zoom_in(&self, theta: &ParamVector, grad: &GradVector, eta: f64) -> Result<ProbeResult> {
        let theta_star = theta.descend(eta, grad);
        let chain = self.chain(theta, grad, eta / self.factor as f64)?;
        let loss1 = self.problem.loss(&theta_star, self.batch);
        let loss2 = self.problem.loss(chain.last().unwrap(), self.batch);
        self.finish(theta_star, chain, loss1, loss2)
    }

    /// `m` sub-steps of η against θ* = θ − mη g; loss1 at the chain end, loss2 at θ*.
    pub fn zoom_out(&self, theta: &ParamVector, grad: &GradVector, eta: f64) -> Result<ProbeResult> {
        let chain = self.chain(theta, grad, eta)?;
        let theta_star = theta.descend(self.factor as f64 * eta, grad);
        let loss1 = self.problem.loss(chain.last().unwrap(), self.batch);
        let loss2 = self.problem.loss(&theta_star, self.batch);
        self.finish(theta_star, chain, loss1, loss2)
    }
}

fn gradient_at<P: Problem + ?Sized>(problem: &P, theta: &ParamVector, batch: &Batch) -> Result<GradVector> {
    theta.ensure_dim(problem.dimension())?;
    let grad = problem.gradient(theta, batch);
    if !grad.is_finite() {
        return Err(BfeError::NonFinite { what: "gradient" });
    }
    Ok(grad)
}

fn check_probe_args(eta: f64, m: u32) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(BfeError::InvalidConfig(format!("probe learning rate must be positive, got {eta}")));
    }
    if m < 2 {
        return Err(BfeError::InvalidConfig(format!("probe factor must be at least 2, got {m}")));
    }
    Ok(())
}

/// Zoom-in probe: one full step of η compared with `m` chained steps of η/m.
#[allow(clippy::too_many_arguments)]
pub fn zoom_in_probe<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    eta: f64,
    m: u32,
    tolerance: ToleranceRule,
    t: usize,
) -> Result<ProbeResult> {
    check_probe_args(eta, m)?;
    let grad = gradient_at(problem, theta, batch)?;
    ProbeCtx { problem, batch, tolerance, t, factor: m }.zoom_in(theta, &grad, eta)
}

/// Zoom-out probe: `m` chained steps of η compared with one step of mη.
#[allow(clippy::too_many_arguments)]
pub fn zoom_out_probe<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    eta: f64,
    m: u32,
    tolerance: ToleranceRule,
    t: usize,
) -> Result<ProbeResult> {
    check_probe_args(eta, m)?;
    let grad = gradient_at(problem, theta, batch)?;
    ProbeCtx { problem, batch, tolerance, t, factor: m }.zoom_out(theta, &grad, eta)
}
