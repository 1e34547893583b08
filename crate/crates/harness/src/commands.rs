//! The four harness commands. Each writes its files under the config's `out_dir`
//! and returns what it wrote so callers (and tests) can inspect the results.

use std::fs;
use std::path::{Path, PathBuf};

use bfe_core::problems::landscape_grid;
use bfe_core::{OptimizerKind, Trace};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{path_length_to, run_jobs, summarize, threshold, Job, RunResult, RunSummary};
use crate::svg;
use crate::trace_io::{read_inner_loops, write_trace_csv, write_trajectory_csv, Histogram};

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub threshold: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl Manifest {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.status != "ok").count()
    }

    pub fn run(&self, name: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.name == name)
    }

    /// `Err(RunsFailed)` if any run failed, for the process exit code.
    pub fn check(&self) -> Result<()> {
        match self.failures() {
            0 => Ok(()),
            failed => Err(HarnessError::RunsFailed { failed, total: self.runs.len() }),
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write(&dir.join("manifest.json"), &(text + "\n"))
}

fn plain_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    cfg.optimizers
        .iter()
        .map(|o| Job { name: o.name.clone(), kind: o.kind, setting: String::new() })
        .collect()
}

fn loss_series(results: &[RunResult]) -> Vec<svg::Series> {
    results
        .iter()
        .filter_map(|r| {
            let trace = r.outcome.as_ref().ok()?;
            let start = std::iter::once((0.0, trace.initial_loss));
            let points = start.chain(trace.records.iter().map(|rec| (rec.t as f64, rec.loss))).collect();
            Some(svg::Series { name: r.job.name.clone(), points })
        })
        .collect()
}

pub fn trace_file(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.trace.csv"))
}

/// Runs every optimizer on the shared problem; writes `<name>.trace.csv` for each,
/// `loss.svg` and `manifest.json`.
pub fn cmd_run(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let built = cfg.problem.build(cfg.seed, base_dir)?;
    let theta0 = cfg.start(built.problem.dimension())?;
    let results = run_jobs(&built, &theta0, cfg, plain_jobs(cfg))?;

    prepare_out(&cfg.out_dir)?;
    let with_theta = built.problem.dimension() == 2;
    for r in &results {
        if let Ok(trace) = &r.outcome {
            write_trace_csv(&trace_file(&cfg.out_dir, &r.job.name), trace, with_theta)?;
        }
    }
    let plot = svg::line_plot("Full-dataset loss", "iteration", "loss", &loss_series(&results), cfg.log_scale);
    write(&cfg.out_dir.join("loss.svg"), &plot)?;

    let th = threshold(&results, cfg.threshold_factor);
    let manifest = Manifest { command: "run", config: cfg.clone(), threshold: th, runs: summarize(&results, th) };
    write_manifest(&cfg.out_dir, &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct HistogramOutput {
    pub trace: PathBuf,
    pub histogram: Histogram,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".csv").trim_end_matches(".trace").to_string()
}

/// Counts inner loops per step in each trace CSV; writes `<stem>.histogram.csv` and
/// `<stem>.histogram.svg` into `out_dir`.
pub fn cmd_histogram(traces: &[PathBuf], out_dir: &Path) -> Result<Vec<HistogramOutput>> {
    if traces.is_empty() {
        return Err(HarnessError::Config("no trace files given".into()));
    }
    let mut outputs = Vec::with_capacity(traces.len());
    let histograms: Vec<(PathBuf, Histogram)> = traces
        .iter()
        .map(|p| Ok((p.clone(), Histogram::from_values(&read_inner_loops(p)?))))
        .collect::<Result<_>>()?;
    prepare_out(out_dir)?;
    for (trace, histogram) in histograms {
        let stem = stem(&trace);
        let csv = out_dir.join(format!("{stem}.histogram.csv"));
        let svg = out_dir.join(format!("{stem}.histogram.svg"));
        histogram.write_csv(&csv)?;
        write(&svg, &svg::bar_chart(&format!("Inner loops: {stem}"), &histogram.bins, histogram.mean))?;
        outputs.push(HistogramOutput { trace, histogram, csv, svg });
    }
    Ok(outputs)
}

/// Runs the optimizers on a 2D problem and draws their trajectories over the loss
/// contours; writes `<name>.trajectory.csv`, `landscape.svg` and `manifest.json`
/// (with path lengths to `landscape.loss_threshold`).
pub fn cmd_landscape(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let built = cfg.problem.build(cfg.seed, base_dir)?;
    let dim = built.problem.dimension();
    if dim != 2 {
        return Err(HarnessError::Config(format!("landscape needs a 2D problem, got dimension {dim}")));
    }
    let theta0 = cfg.start(dim)?;
    let l = &cfg.landscape;
    let bounds = [(l.bounds[0][0], l.bounds[0][1]), (l.bounds[1][0], l.bounds[1][1])];
    let grid = landscape_grid(&*built.problem, &built.dataset, bounds, l.resolution)?;
    let results = run_jobs(&built, &theta0, cfg, plain_jobs(cfg))?;

    prepare_out(&cfg.out_dir)?;
    let mut trajectories = Vec::new();
    for r in &results {
        if let Ok(trace) = &r.outcome {
            write_trajectory_csv(&cfg.out_dir.join(format!("{}.trajectory.csv", r.job.name)), trace)?;
            let points = trace.path().map(|p| (p[0], p[1])).collect();
            trajectories.push(svg::Trajectory { name: r.job.name.clone(), points });
        }
    }
    let plot = svg::contour_plot("Optimizer trajectories", &grid, l.levels, &trajectories);
    write(&cfg.out_dir.join("landscape.svg"), &plot)?;

    let th = threshold(&results, cfg.threshold_factor);
    let mut runs = summarize(&results, th);
    for (summary, r) in runs.iter_mut().zip(&results) {
        summary.path_length = r.outcome.as_ref().ok().and_then(|t: &Trace| path_length_to(t, l.loss_threshold));
    }
    let manifest = Manifest { command: "landscape", config: cfg.clone(), threshold: th, runs };
    write_manifest(&cfg.out_dir, &manifest)?;
    Ok(manifest)
}

/// Expands the optimizers over the sweep grid.
pub fn sweep_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for o in &cfg.optimizers {
        let job = |kind: OptimizerKind, setting: String| Job { name: o.name.clone(), kind, setting };
        match o.kind {
            OptimizerKind::ImprovedBfe(_) | OptimizerKind::ZoomInOnly(_) | OptimizerKind::Mfe(_)
                if !cfg.sweep.tolerances.is_empty() =>
            {
                for rule in &cfg.sweep.tolerances {
                    let mut kind = o.kind;
                    kind.bfe_config_mut().expect("BFE family").tolerance = *rule;
                    jobs.push(job(kind, rule.label()));
                }
            }
            OptimizerKind::Sgd(sgd) if !cfg.sweep.betas.is_empty() => {
                for &beta in &cfg.sweep.betas {
                    jobs.push(job(OptimizerKind::Sgd(bfe_core::baselines::MomentumConfig { beta, ..sgd }), format!("beta={beta}")));
                }
            }
            kind => jobs.push(job(kind, "as_configured".into())),
        }
    }
    jobs
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub threshold: Option<f64>,
    pub rows: Vec<RunSummary>,
    pub csv: PathBuf,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (optimizer, grid setting) with final loss, steps-to-threshold and mean
/// inner loops, written to `sweep.csv`. Failed cells are recorded and the sweep goes on.
pub fn cmd_sweep(cfg: &ExperimentConfig, base_dir: &Path) -> Result<SweepOutput> {
    cfg.validate()?;
    let built = cfg.problem.build(cfg.seed, base_dir)?;
    let theta0 = cfg.start(built.problem.dimension())?;
    let results = run_jobs(&built, &theta0, cfg, sweep_jobs(cfg))?;
    let th = threshold(&results, cfg.threshold_factor);
    let rows = summarize(&results, th);

    prepare_out(&cfg.out_dir)?;
    let path = cfg.out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::input(&path, e.to_string()))?;
    let io = |e: csv::Error| HarnessError::input(&path, e.to_string());
    w.write_record([
        "optimizer",
        "kind",
        "setting",
        "status",
        "final_loss",
        "best_loss",
        "steps_to_threshold",
        "mean_inner_loops",
        "failure_step",
        "failure_reason",
    ])
    .map_err(io)?;
    for r in &rows {
        w.write_record([
            r.name.clone(),
            r.kind.clone(),
            r.setting.clone(),
            r.status.to_string(),
            opt(r.final_loss),
            opt(r.best_loss),
            opt(r.steps_to_threshold),
            opt(r.mean_inner_loops),
            opt(r.failure.as_ref().map(|f| f.step)),
            r.failure.as_ref().map(|f| f.reason.clone()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(SweepOutput { threshold: th, rows, csv: path })
}
