//! Benchmark harness for the BFE optimizer family: runs optimizers on shared
//! problems, writes trace CSVs and JSON manifests, and renders SVG plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod svg;
pub mod trace_io;

pub use commands::{cmd_histogram, cmd_landscape, cmd_run, cmd_sweep, Manifest, SweepOutput};
pub use config::{ExperimentConfig, Overrides};
pub use error::{HarnessError, Result};
