//! CSV files: per-step traces, 2D trajectories and inner-loop histograms.
//!
//! Trace schema: `t,loss,eta_min,eta_mean,eta_max,inner_loops,branch`, plus
//! `theta1,theta2` for 2D problems. Optimizers with a scalar η repeat it across the
//! three η columns. Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use bfe_core::Trace;

use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: [&str; 7] = ["t", "loss", "eta_min", "eta_mean", "eta_max", "inner_loops", "branch"];

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::input(path, format!("{other:?}")),
    }
}

pub fn write_trace_csv(path: &Path, trace: &Trace, with_theta: bool) -> Result<()> {
    let err = csv_err(path);
    let mut w = create(path)?;
    let mut header: Vec<&str> = TRACE_HEADER.to_vec();
    if with_theta {
        header.extend(["theta1", "theta2"]);
    }
    w.write_record(&header).map_err(&err)?;
    for r in &trace.records {
        let mut row = vec![
            r.t.to_string(),
            r.loss.to_string(),
            r.eta_min.to_string(),
            r.eta_mean.to_string(),
            r.eta_max.to_string(),
            r.inner_loops.to_string(),
            r.branch.as_str().to_string(),
        ];
        if with_theta {
            row.extend(r.theta.iter().take(2).map(f64::to_string));
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `t,theta1,theta2,loss`, starting with the shared θ0 at t = 0.
pub fn write_trajectory_csv(path: &Path, trace: &Trace) -> Result<()> {
    let err = csv_err(path);
    let mut w = create(path)?;
    w.write_record(["t", "theta1", "theta2", "loss"]).map_err(&err)?;
    let start = std::iter::once((0, &trace.theta0, trace.initial_loss));
    let steps = trace.records.iter().map(|r| (r.t, &r.theta, r.loss));
    for (t, theta, loss) in start.chain(steps) {
        w.write_record([t.to_string(), theta[0].to_string(), theta[1].to_string(), loss.to_string()])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads the `inner_loops` column of a trace CSV.
pub fn read_inner_loops(path: &Path) -> Result<Vec<usize>> {
    let err = csv_err(path);
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let column = r
        .headers()
        .map_err(&err)?
        .iter()
        .position(|h| h == "inner_loops")
        .ok_or_else(|| HarnessError::input(path, "no inner_loops column"))?;
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(&err)?;
        let cell = record.get(column).unwrap_or("");
        let v = cell
            .parse()
            .map_err(|_| HarnessError::input(path, format!("row {}: bad inner_loops value {cell:?}", line + 1)))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(HarnessError::input(path, "trace has no rows"));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: BTreeMap<usize, usize>,
    pub mean: f64,
}

impl Histogram {
    pub fn from_values(values: &[usize]) -> Self {
        let mut bins = BTreeMap::new();
        for &v in values {
            *bins.entry(v).or_insert(0) += 1;
        }
        let mean = values.iter().sum::<usize>() as f64 / values.len() as f64;
        Self { bins, mean }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let err = csv_err(path);
        let mut w = create(path)?;
        w.write_record(["inner_loops", "count"]).map_err(&err)?;
        for (k, n) in &self.bins {
            w.write_record([k.to_string(), n.to_string()]).map_err(&err)?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }
}
