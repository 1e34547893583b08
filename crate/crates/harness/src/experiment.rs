//! Running a set of optimizers on one problem and summarising the results.

use bfe_core::{run, BfeError, OptimizerKind, ParamVector, RunOptions, StopRule, Termination, Trace};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BuiltProblem, ExperimentConfig};
use crate::error::{HarnessError, Result};

/// One optimizer run to perform.
#[derive(Debug, Clone)]
pub struct Job {
    pub name: String,
    pub kind: OptimizerKind,
    /// Free-form description of the sweep cell; empty for plain runs.
    pub setting: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub job: Job,
    pub outcome: std::result::Result<Trace, Failure>,
}

/// Runs every job on the shared dataset, start point and seed, in parallel. Run
/// failures are kept per job; anything else (bad configuration) aborts.
pub fn run_jobs(built: &BuiltProblem, theta0: &ParamVector, cfg: &ExperimentConfig, jobs: Vec<Job>) -> Result<Vec<RunResult>> {
    let options = RunOptions {
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        stop: StopRule { max_steps: cfg.max_steps, grad_norm_tol: cfg.grad_norm_tol },
    };
    jobs.into_par_iter()
        .map(|job| {
            let outcome = match run(&*built.problem, &built.dataset, &job.kind, theta0, &options) {
                Ok(trace) => Ok(trace),
                Err(BfeError::RunFailure { step, reason }) => Err(Failure { step, reason }),
                Err(e) => return Err(HarnessError::Config(format!("optimizer {}: {e}", job.name))),
            };
            Ok(RunResult { job, outcome })
        })
        .collect()
}

/// Sum of segment lengths along the trace up to and including the first point whose
/// loss is strictly below `threshold`; `None` if the trace never gets there.
pub fn path_length_to(trace: &Trace, threshold: f64) -> Option<f64> {
    if trace.initial_loss < threshold {
        return Some(0.0);
    }
    let mut length = 0.0;
    let mut previous = &trace.theta0;
    for r in &trace.records {
        length += previous.distance(&r.theta);
        previous = &r.theta;
        if r.loss < threshold {
            return Some(length);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub kind: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub setting: String,
    pub status: &'static str,
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub best_loss: Option<f64>,
    pub steps_to_threshold: Option<usize>,
    pub mean_inner_loops: Option<f64>,
    pub termination: Option<Termination>,
    pub failure: Option<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length: Option<f64>,
}

/// Loss level every optimizer is timed against: `factor` × the best loss any
/// successful run reached.
pub fn threshold(results: &[RunResult], factor: f64) -> Option<f64> {
    results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(Trace::best_loss)
        .reduce(f64::min)
        .map(|best| factor * best)
}

pub fn summarize(results: &[RunResult], threshold: Option<f64>) -> Vec<RunSummary> {
    results
        .iter()
        .map(|r| {
            let base = RunSummary {
                name: r.job.name.clone(),
                kind: r.job.kind.kind_name().to_string(),
                setting: r.job.setting.clone(),
                status: "ok",
                steps: 0,
                final_loss: None,
                best_loss: None,
                steps_to_threshold: None,
                mean_inner_loops: None,
                termination: None,
                failure: None,
                path_length: None,
            };
            match &r.outcome {
                Ok(trace) => RunSummary {
                    steps: trace.len(),
                    final_loss: Some(trace.final_loss()),
                    best_loss: Some(trace.best_loss()),
                    steps_to_threshold: threshold.and_then(|th| trace.steps_to(th)),
                    mean_inner_loops: Some(trace.mean_inner_loops()),
                    termination: Some(trace.termination),
                    ..base
                },
                Err(f) => RunSummary {
                    status: "failed",
                    steps: f.step.saturating_sub(1),
                    failure: Some(f.clone()),
                    ..base
                },
            }
        })
        .collect()
}
