//! JSON experiment configuration. Every field except `problem` and `optimizers` has
//! a default, so a config file only needs to state what differs.

use std::fs;
use std::path::{Path, PathBuf};

use bfe_core::baselines::{AdamConfig, MomentumConfig};
use bfe_core::bfe::{BfeConfig, ToleranceRule};
use bfe_core::problems::{make_quadratic, make_regression, read_dataset_csv, QuadraticSpec, Regression, RegressionSpec};
use bfe_core::{Batch, OptimizerKind, ParamVector, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Synthetic regression settings. Without `data_seed` the dataset is drawn with the
/// experiment seed, so `--seed` changes both the data and the batch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionProblem {
    pub true_weights: Vec<f64>,
    pub noise_std: f64,
    pub n_samples: usize,
    pub feature_range: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
}

impl Default for RegressionProblem {
    fn default() -> Self {
        let spec = RegressionSpec::default();
        Self {
            true_weights: spec.true_weights,
            noise_std: spec.noise_std,
            n_samples: spec.n_samples,
            feature_range: spec.feature_range,
            data_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProblemSpec {
    Regression(RegressionProblem),
    Quadratic(QuadraticSpec),
    /// Regression on a dataset pinned as CSV (`x0,...,xk,y`); relative paths resolve
    /// against the config file's directory.
    Dataset { path: PathBuf },
}

/// A problem instance ready to run: the loss, and the full dataset it is evaluated on.
pub struct BuiltProblem {
    pub problem: Box<dyn Problem>,
    pub dataset: Batch,
}

impl ProblemSpec {
    pub fn build(&self, seed: u64, base_dir: &Path) -> Result<BuiltProblem> {
        match self {
            ProblemSpec::Regression(r) => {
                let spec = RegressionSpec {
                    true_weights: r.true_weights.clone(),
                    noise_std: r.noise_std,
                    n_samples: r.n_samples,
                    feature_range: r.feature_range,
                    seed: r.data_seed.unwrap_or(seed),
                };
                let (dataset, problem) = make_regression(&spec)?;
                Ok(BuiltProblem { problem: Box::new(problem), dataset })
            }
            ProblemSpec::Quadratic(spec) => Ok(BuiltProblem {
                problem: Box::new(make_quadratic(spec.clone())?),
                dataset: Batch::unit(),
            }),
            ProblemSpec::Dataset { path } => {
                let path = base_dir.join(path);
                let file = fs::File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
                let dataset = read_dataset_csv(file).map_err(|e| HarnessError::input(&path, e.to_string()))?;
                let problem = Regression::new(dataset.n_features());
                Ok(BuiltProblem { problem: Box::new(problem), dataset })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerEntry {
    pub name: String,
    #[serde(flatten)]
    pub kind: OptimizerKind,
}

impl OptimizerEntry {
    pub fn new(name: &str, kind: OptimizerKind) -> Self {
        Self { name: name.to_string(), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSpec {
    /// `[[x_lo, x_hi], [y_lo, y_hi]]`
    pub bounds: [[f64; 2]; 2],
    pub resolution: [usize; 2],
    /// Trajectory path lengths are measured up to the first point below this loss.
    pub loss_threshold: f64,
    /// Number of contour lines drawn.
    pub levels: usize,
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        Self {
            bounds: [[-5.0, 5.0], [-5.0, 5.0]],
            resolution: [81, 81],
            loss_threshold: 1e-3,
            levels: 12,
        }
    }
}

/// Sweep grid: every BFE-family optimizer is re-run once per tolerance rule and every
/// SGD optimizer once per momentum β. Optimizers without a matching axis (or with an
/// empty one) run once as configured.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub tolerances: Vec<ToleranceRule>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Shared starting point; zeros when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    pub optimizers: Vec<OptimizerEntry>,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Stop a run once the full-dataset gradient norm drops below this (0 disables).
    pub grad_norm_tol: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Steps-to-threshold counts steps until loss ≤ factor × best loss of the comparison.
    pub threshold_factor: f64,
    /// Plot loss on a log axis.
    pub log_scale: bool,
    pub landscape: LandscapeSpec,
    pub sweep: SweepSpec,
}

fn sgd_nesterov(beta: f64) -> OptimizerKind {
    OptimizerKind::Sgd(MomentumConfig { eta: 0.001, beta, nesterov: true })
}

impl Default for ExperimentConfig {
    /// The regression benchmark: improved BFE against SGD with Nesterov momentum 0.9,
    /// batch 512, 5000 steps, both starting at zero with η = 0.001.
    fn default() -> Self {
        Self {
            problem: ProblemSpec::Regression(RegressionProblem::default()),
            theta0: None,
            optimizers: vec![
                OptimizerEntry::new("bfe", OptimizerKind::ImprovedBfe(BfeConfig::default())),
                OptimizerEntry::new("sgd_nesterov", sgd_nesterov(0.9)),
            ],
            batch_size: 512,
            max_steps: 5000,
            grad_norm_tol: 0.0,
            seed: 42,
            out_dir: PathBuf::from("out"),
            threshold_factor: 1.05,
            log_scale: true,
            landscape: LandscapeSpec::default(),
            sweep: SweepSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// The 2D trajectory comparison: a bowl with eigenvalues 1 and 10 whose axes are
    /// rotated 45°, started from (−4, 0).
    pub fn landscape_default() -> Self {
        let bfe = BfeConfig::default();
        Self {
            problem: ProblemSpec::Quadratic(QuadraticSpec {
                matrix: vec![vec![5.5, 4.5], vec![4.5, 5.5]],
                minimizer: vec![0.0, 0.0],
            }),
            theta0: Some(vec![-4.0, 0.0]),
            optimizers: vec![
                OptimizerEntry::new("bfe", OptimizerKind::ImprovedBfe(bfe)),
                OptimizerEntry::new("bfe_gradient_change", OptimizerKind::GradientChange(bfe)),
                OptimizerEntry::new("adaptive_bfe_gradient_change", OptimizerKind::AdaptiveGradientChange(bfe)),
                OptimizerEntry::new("adam", OptimizerKind::Adam(AdamConfig::default())),
                OptimizerEntry::new("sgd_nesterov", sgd_nesterov(0.9)),
            ],
            batch_size: 1,
            max_steps: 20_000,
            grad_norm_tol: 1e-6,
            out_dir: PathBuf::from("out/landscape"),
            ..Self::default()
        }
    }

    /// Tolerance rules for the BFE variants and β ∈ {0, 0.5, 0.9} for SGD-Nesterov on
    /// the regression benchmark.
    pub fn sweep_default() -> Self {
        let bfe = BfeConfig::default();
        Self {
            optimizers: vec![
                OptimizerEntry::new("bfe", OptimizerKind::ImprovedBfe(bfe)),
                // restarts from eta0 every step and can only shrink it
                OptimizerEntry::new("bfe_zoom_in_only", OptimizerKind::ZoomInOnly(BfeConfig { eta0: 1.0, ..bfe })),
                OptimizerEntry::new("sgd_nesterov", sgd_nesterov(0.9)),
            ],
            out_dir: PathBuf::from("out/sweep"),
            sweep: SweepSpec {
                tolerances: vec![
                    ToleranceRule::MeanScaled { eps: 1e-3 },
                    ToleranceRule::MinScaled { eps: 1e-3 },
                    ToleranceRule::Constant { value: 1e-5 },
                    ToleranceRule::DecayMeanScaled { eps: 0.1, t_decay: 100 },
                ],
                betas: vec![0.0, 0.5, 0.9],
            },
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.optimizers.is_empty() {
            return fail("at least one optimizer is required".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.max_steps == 0 {
            return fail("max_steps must be at least 1".into());
        }
        if !(self.grad_norm_tol >= 0.0) {
            return fail("grad_norm_tol must be non-negative".into());
        }
        if !(self.threshold_factor >= 1.0 && self.threshold_factor.is_finite()) {
            return fail(format!("threshold_factor must be at least 1, got {}", self.threshold_factor));
        }
        let mut names: Vec<&str> = self.optimizers.iter().map(|o| o.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return fail(format!("duplicate optimizer name {:?}", w[0]));
        }
        for o in &self.optimizers {
            if o.name.is_empty() || !o.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
                return fail(format!("optimizer name {:?} must be non-empty and use [A-Za-z0-9_.-]", o.name));
            }
            o.kind
                .validate()
                .map_err(|e| HarnessError::Config(format!("optimizer {}: {e}", o.name)))?;
        }
        for rule in &self.sweep.tolerances {
            rule.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.sweep.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return fail("sweep betas must lie in [0, 1)".into());
        }
        let l = &self.landscape;
        if l.resolution.iter().any(|&r| r < 2) {
            return fail("landscape resolution must be at least 2 per axis".into());
        }
        if l.bounds.iter().any(|[lo, hi]| !(lo < hi)) {
            return fail("landscape bounds must be increasing".into());
        }
        if !(l.loss_threshold > 0.0) {
            return fail("landscape loss_threshold must be positive".into());
        }
        Ok(())
    }

    /// Starting point for a problem of dimension `dim`.
    pub fn start(&self, dim: usize) -> Result<ParamVector> {
        match &self.theta0 {
            Some(t) if t.len() != dim => Err(HarnessError::Config(format!(
                "theta0 has {} entries but the problem has dimension {dim}",
                t.len()
            ))),
            Some(t) => Ok(ParamVector::new(t.clone())),
            None => Ok(ParamVector::zeros(dim)),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub max_steps: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out_dir {
            cfg.out_dir = out.clone();
        }
        if let Some(steps) = self.max_steps {
            cfg.max_steps = steps;
        }
    }
}
