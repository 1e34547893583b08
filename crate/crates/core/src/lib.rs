//! Forward-exploration learning-rate search for gradient descent.
//!
//! The crate is organised bottom-up:
//!
//! - [`param`], [`batch`] and [`problem`] hold the shared numeric pieces: parameter and
//!   gradient vectors, mini-batches, the loss/gradient [`Problem`] interface and a
//!   central-difference gradient check.
//! - [`bfe`] implements the binary (and m-ary) forward exploration optimizers: the
//!   loss-comparison search with zoom-in and zoom-out, its zoom-in-only variant, the
//!   gradient-change search, its per-coordinate adaptive form and multiple forward
//!   exploration.
//! - [`baselines`] has SGD with classical/Nesterov momentum and Adam.
//! - [`problems`] generates the synthetic regression and quadratic benchmarks.
//! - [`runner`] drives any optimizer over a dataset and records a [`Trace`].
//!
//! ```
//! use bfe_core::bfe::BfeConfig;
//! use bfe_core::problems::{make_regression, RegressionSpec};
//! use bfe_core::{run, OptimizerKind, ParamVector, RunOptions, StopRule};
//!
//! let (data, problem) = make_regression(&RegressionSpec::default())?;
//! let options = RunOptions { batch_size: 512, seed: 42, stop: StopRule { max_steps: 500, grad_norm_tol: 0.0 } };
//! let trace = run(&problem, &data, &OptimizerKind::ImprovedBfe(BfeConfig::default()), &ParamVector::zeros(2), &options)?;
//! assert!(trace.final_loss() < trace.initial_loss);
//! assert!(trace.mean_inner_loops() < 2.0);
//! # Ok::<(), bfe_core::BfeError>(())
//! ```

pub mod baselines;
pub mod batch;
pub mod bfe;
pub mod error;
pub mod param;
pub mod problem;
pub mod problems;
pub mod runner;

pub use batch::{mini_batches, Batch, BatchStream};
pub use error::{BfeError, Result};
pub use param::{GradVector, ParamVector};
pub use problem::{finite_difference_gradient, Problem};
pub use runner::{run, OptimizerKind, RunOptions, StopRule, Termination, Trace, TraceRecord};
