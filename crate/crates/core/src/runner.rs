//! Outer optimization loop shared by every optimizer, recording a [`Trace`].

use serde::{Deserialize, Serialize};

use crate::baselines::{adam_step, sgd_momentum_step, AdamConfig, MomentumConfig};
use crate::batch::{Batch, BatchStream};
use crate::bfe::{
    adaptive_bfe_gradient_change_step, bfe_gradient_change_step, bfe_zoom_in_only_step,
    improved_bfe_step, mfe_step, AdaptiveState, BfeConfig, Branch, SearchState,
};
use crate::error::{BfeError, Result};
use crate::param::ParamVector;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    ImprovedBfe(BfeConfig),
    ZoomInOnly(BfeConfig),
    GradientChange(BfeConfig),
    AdaptiveGradientChange(BfeConfig),
    Mfe(BfeConfig),
    Sgd(MomentumConfig),
    Adam(AdamConfig),
}

impl OptimizerKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerKind::ImprovedBfe(c)
            | OptimizerKind::ZoomInOnly(c)
            | OptimizerKind::GradientChange(c)
            | OptimizerKind::AdaptiveGradientChange(c)
            | OptimizerKind::Mfe(c) => c.validate(),
            OptimizerKind::Sgd(c) => c.validate(),
            OptimizerKind::Adam(c) => c.validate(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            OptimizerKind::ImprovedBfe(_) => "improved_bfe",
            OptimizerKind::ZoomInOnly(_) => "zoom_in_only",
            OptimizerKind::GradientChange(_) => "gradient_change",
            OptimizerKind::AdaptiveGradientChange(_) => "adaptive_gradient_change",
            OptimizerKind::Mfe(_) => "mfe",
            OptimizerKind::Sgd(_) => "sgd",
            OptimizerKind::Adam(_) => "adam",
        }
    }

    pub fn bfe_config(&self) -> Option<&BfeConfig> {
        match self {
            OptimizerKind::ImprovedBfe(c)
            | OptimizerKind::ZoomInOnly(c)
            | OptimizerKind::GradientChange(c)
            | OptimizerKind::AdaptiveGradientChange(c)
            | OptimizerKind::Mfe(c) => Some(c),
            _ => None,
        }
    }

    pub fn bfe_config_mut(&mut self) -> Option<&mut BfeConfig> {
        match self {
            OptimizerKind::ImprovedBfe(c)
            | OptimizerKind::ZoomInOnly(c)
            | OptimizerKind::GradientChange(c)
            | OptimizerKind::AdaptiveGradientChange(c)
            | OptimizerKind::Mfe(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_steps: usize,
    /// Stop once the full-dataset gradient norm falls below this; 0 disables.
    #[serde(default)]
    pub grad_norm_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub batch_size: usize,
    pub seed: u64,
    pub stop: StopRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// Loss over the whole dataset after the step.
    pub loss: f64,
    pub eta_min: f64,
    pub eta_mean: f64,
    pub eta_max: f64,
    pub inner_loops: usize,
    pub branch: Branch,
    pub theta: ParamVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    Converged { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub theta0: ParamVector,
    pub initial_loss: f64,
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn best_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).fold(self.initial_loss, f64::min)
    }

    pub fn mean_inner_loops(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.inner_loops as f64).sum::<f64>() / self.records.len() as f64
    }

    /// First step whose loss is at or below `threshold`.
    pub fn steps_to(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.loss <= threshold).map(|r| r.t)
    }

    /// Parameter path θ0, θ1, ... as visited.
    pub fn path(&self) -> impl Iterator<Item = &ParamVector> {
        std::iter::once(&self.theta0).chain(self.records.iter().map(|r| &r.theta))
    }
}

enum State {
    Search(SearchState),
    Adaptive(AdaptiveState),
    Velocity(Vec<f64>),
    Moments(Vec<f64>, Vec<f64>),
    Fresh,
}

struct StepSummary {
    eta: (f64, f64, f64),
    inner_loops: usize,
    branch: Branch,
}

fn scalar(eta: f64) -> (f64, f64, f64) {
    (eta, eta, eta)
}

fn initial_state(optimizer: &OptimizerKind, dim: usize) -> State {
    match optimizer {
        OptimizerKind::ImprovedBfe(c) | OptimizerKind::GradientChange(c) | OptimizerKind::Mfe(c) => {
            State::Search(SearchState::new(c.eta0))
        }
        OptimizerKind::AdaptiveGradientChange(c) => State::Adaptive(AdaptiveState::new(dim, c.eta0)),
        OptimizerKind::ZoomInOnly(_) => State::Fresh,
        OptimizerKind::Sgd(_) => State::Velocity(vec![0.0; dim]),
        OptimizerKind::Adam(_) => State::Moments(vec![0.0; dim], vec![0.0; dim]),
    }
}

fn step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    state: &mut State,
    t: usize,
    optimizer: &OptimizerKind,
) -> Result<(ParamVector, StepSummary)> {
    let out = match (optimizer, &mut *state) {
        (OptimizerKind::ImprovedBfe(cfg), State::Search(s)) => {
            let (next, ns, r) = improved_bfe_step(problem, batch, theta, s, t, cfg)?;
            *s = ns;
            (next, StepSummary { eta: scalar(r.eta_out), inner_loops: r.inner_loops, branch: r.branch })
        }
        (OptimizerKind::Mfe(cfg), State::Search(s)) => {
            let (next, ns, r) = mfe_step(problem, batch, theta, s, t, cfg)?;
            *s = ns;
            (next, StepSummary { eta: scalar(r.eta_out), inner_loops: r.inner_loops, branch: r.branch })
        }
        (OptimizerKind::GradientChange(cfg), State::Search(s)) => {
            let (next, ns, r) = bfe_gradient_change_step(problem, batch, theta, s, cfg)?;
            *s = ns;
            (next, StepSummary { eta: scalar(r.eta_out), inner_loops: r.inner_loops, branch: r.branch })
        }
        (OptimizerKind::ZoomInOnly(cfg), State::Fresh) => {
            let (next, eta, r) = bfe_zoom_in_only_step(problem, batch, theta, t, cfg)?;
            (next, StepSummary { eta: scalar(eta), inner_loops: r.inner_loops, branch: r.branch })
        }
        (OptimizerKind::AdaptiveGradientChange(cfg), State::Adaptive(s)) => {
            let (next, ns, r) = adaptive_bfe_gradient_change_step(problem, batch, theta, s, cfg)?;
            *s = ns;
            let lo = s.etas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = s.etas.iter().sum::<f64>() / s.etas.len() as f64;
            (next, StepSummary { eta: (lo, mean, hi), inner_loops: r.inner_loops, branch: r.branch })
        }
        (OptimizerKind::Sgd(cfg), State::Velocity(v)) => {
            let (next, nv) = sgd_momentum_step(problem, batch, theta, v, cfg)?;
            *v = nv;
            (next, StepSummary { eta: scalar(cfg.eta), inner_loops: 0, branch: Branch::None })
        }
        (OptimizerKind::Adam(cfg), State::Moments(m, v)) => {
            let (next, nm, nv) = adam_step(problem, batch, theta, m, v, t, cfg)?;
            *m = nm;
            *v = nv;
            (next, StepSummary { eta: scalar(cfg.alpha), inner_loops: 0, branch: Branch::None })
        }
        _ => unreachable!("optimizer state does not match optimizer kind"),
    };
    Ok(out)
}

/// Runs `optimizer` from `theta0` over mini-batches of `dataset`.
///
/// Each step draws the next batch from a [`BatchStream`] seeded with `options.seed`
/// and uses that one batch for every probe of the step. The trace records the loss
/// over the full dataset after each step. A non-finite loss, gradient or parameter
/// aborts the run with [`BfeError::RunFailure`] naming the step.
pub fn run<P: Problem + ?Sized>(
    problem: &P,
    dataset: &Batch,
    optimizer: &OptimizerKind,
    theta0: &ParamVector,
    options: &RunOptions,
) -> Result<Trace> {
    if options.stop.max_steps == 0 {
        return Err(BfeError::InvalidConfig("max_steps must be at least 1".into()));
    }
    if !(options.stop.grad_norm_tol >= 0.0) {
        return Err(BfeError::InvalidConfig("grad_norm_tol must be non-negative".into()));
    }
    optimizer.validate()?;
    theta0.ensure_dim(problem.dimension())?;
    let fail = |step: usize, reason: String| BfeError::RunFailure { step, reason };

    let initial_loss = problem.loss(theta0, dataset);
    if !initial_loss.is_finite() || !theta0.is_finite() {
        return Err(fail(0, "non-finite starting point".into()));
    }
    let mut stream = BatchStream::new(dataset, options.batch_size, options.seed)?;
    let mut state = initial_state(optimizer, problem.dimension());
    let mut theta = theta0.clone();
    let mut records = Vec::with_capacity(options.stop.max_steps.min(1 << 16));
    let mut termination = Termination::MaxSteps;

    for t in 1..=options.stop.max_steps {
        let batch = stream.next_batch();
        let (next, summary) = step(problem, &batch, &theta, &mut state, t, optimizer).map_err(|e| match e {
            BfeError::NonFinite { .. } | BfeError::NonFiniteProbe { .. } => fail(t, e.to_string()),
            other => other,
        })?;
        if !next.is_finite() {
            return Err(fail(t, "parameters became non-finite".into()));
        }
        let loss = problem.loss(&next, dataset);
        if !loss.is_finite() {
            return Err(fail(t, format!("non-finite loss {loss}")));
        }
        theta = next;
        records.push(TraceRecord {
            t,
            loss,
            eta_min: summary.eta.0,
            eta_mean: summary.eta.1,
            eta_max: summary.eta.2,
            inner_loops: summary.inner_loops,
            branch: summary.branch,
            theta: theta.clone(),
        });
        if options.stop.grad_norm_tol > 0.0
            && problem.gradient(&theta, dataset).norm() < options.stop.grad_norm_tol
        {
            termination = Termination::Converged { step: t };
            break;
        }
    }
    Ok(Trace {
        theta0: theta0.clone(),
        initial_loss,
        records,
        termination,
    })
}
