//! Synthetic benchmark problems: linear regression with mean-squared error, quadratic
//! bowls, and loss grids over 2D problems for contour plots.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::error::{BfeError, Result};
use crate::param::{GradVector, ParamVector};
use crate::problem::Problem;

/// Generator settings for a synthetic linear regression dataset.
///
/// `true_weights` holds one weight per feature followed by the bias, so a
/// univariate model with slope 2 and intercept −1 is `[2.0, -1.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub true_weights: Vec<f64>,
    pub noise_std: f64,
    pub n_samples: usize,
    pub feature_range: (f64, f64),
    pub seed: u64,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            true_weights: vec![2.0, -1.0],
            noise_std: 0.1,
            n_samples: 4096,
            feature_range: (-1.0, 1.0),
            seed: 42,
        }
    }
}

impl RegressionSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BfeError::InvalidConfig(msg));
        if self.true_weights.len() < 2 {
            return fail("true_weights needs at least one weight and a bias".into());
        }
        if self.n_samples == 0 {
            return fail("n_samples must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail(format!("noise_std must be finite and non-negative, got {}", self.noise_std));
        }
        let (lo, hi) = self.feature_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return fail(format!("empty feature range [{lo}, {hi}]"));
        }
        if self.true_weights.iter().any(|w| !w.is_finite()) {
            return fail("true_weights must be finite".into());
        }
        Ok(())
    }
}

/// Mean-squared error of an affine model, `mean((w·x + b − y)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regression {
    n_features: usize,
}

impl Regression {
    pub fn new(n_features: usize) -> Self {
        Self { n_features }
    }

    fn residual(&self, theta: &ParamVector, x: &[f64], y: f64) -> f64 {
        let (weights, bias) = theta.split_at(self.n_features);
        weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + bias[0] - y
    }
}

impl Problem for Regression {
    fn dimension(&self) -> usize {
        self.n_features + 1
    }

    fn loss(&self, theta: &ParamVector, batch: &Batch) -> f64 {
        let total: f64 = batch
            .rows()
            .map(|(x, y)| {
                let r = self.residual(theta, x, y);
                r * r
            })
            .sum();
        total / batch.len() as f64
    }

    fn gradient(&self, theta: &ParamVector, batch: &Batch) -> GradVector {
        let mut grad = vec![0.0; self.n_features + 1];
        for (x, y) in batch.rows() {
            let r = self.residual(theta, x, y);
            for (g, x) in grad.iter_mut().zip(x) {
                *g += r * x;
            }
            grad[self.n_features] += r;
        }
        let scale = 2.0 / batch.len() as f64;
        GradVector::new(grad.into_iter().map(|g| g * scale).collect())
    }
}

/// Draws the dataset: for each sample, its features uniformly from `feature_range`
/// and then its Gaussian noise, all from one ChaCha8 stream seeded with `spec.seed`.
pub fn make_regression(spec: &RegressionSpec) -> Result<(Batch, Regression)> {
    spec.validate()?;
    let n_features = spec.true_weights.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std)
        .map_err(|e| BfeError::InvalidConfig(format!("noise distribution: {e}")))?;
    let (lo, hi) = spec.feature_range;
    let truth = ParamVector::new(spec.true_weights.clone());
    let problem = Regression::new(n_features);

    let mut features = Vec::with_capacity(spec.n_samples);
    let mut targets = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let x: Vec<f64> = (0..n_features).map(|_| rng.random_range(lo..hi)).collect();
        let clean = problem.residual(&truth, &x, 0.0);
        targets.push(clean + noise.sample(&mut rng));
        features.push(x);
    }
    Ok((Batch::new(features, targets)?, problem))
}

/// Writes a dataset as CSV with header `x0,...,xk,y`.
pub fn write_dataset_csv<W: Write>(dataset: &Batch, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..dataset.n_features()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    out.write_record(&header)?;
    for (x, y) in dataset.rows() {
        let mut record: Vec<String> = x.iter().map(f64::to_string).collect();
        record.push(y.to_string());
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| BfeError::Csv(e.to_string()))?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Batch> {
    let mut input = csv::Reader::from_reader(reader);
    let header = input.headers()?.clone();
    let width = header.len();
    let expected: Vec<String> = (0..width.saturating_sub(1))
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    if width < 2 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(BfeError::InvalidData(format!(
            "dataset header must be x0,...,xk,y; got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (line, record) in input.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| BfeError::InvalidData(format!("row {}: {e}", line + 1)))?;
        targets.push(values[width - 1]);
        features.push(values[..width - 1].to_vec());
    }
    Batch::new(features, targets)
}

/// `f(θ) = ½ (θ − θ_opt)ᵀ A (θ − θ_opt)` with `A` symmetric positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub matrix: Vec<Vec<f64>>,
    pub minimizer: Vec<f64>,
}

impl QuadraticSpec {
    pub fn diagonal(curvatures: Vec<f64>) -> Self {
        let n = curvatures.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { curvatures[i] } else { 0.0 }).collect())
            .collect();
        Self {
            matrix,
            minimizer: vec![0.0; n],
        }
    }

    pub fn isotropic(dim: usize, curvature: f64) -> Self {
        Self::diagonal(vec![curvature; dim])
    }

    pub fn with_minimizer(mut self, minimizer: Vec<f64>) -> Self {
        self.minimizer = minimizer;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    matrix: Vec<Vec<f64>>,
    minimizer: Vec<f64>,
}

impl Quadratic {
    pub fn minimizer(&self) -> ParamVector {
        ParamVector::new(self.minimizer.clone())
    }

    fn offset(&self, theta: &ParamVector) -> Vec<f64> {
        theta.iter().zip(&self.minimizer).map(|(t, o)| t - o).collect()
    }

    fn apply(&self, d: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(d).map(|(a, d)| a * d).sum())
            .collect()
    }
}

impl Problem for Quadratic {
    fn dimension(&self) -> usize {
        self.minimizer.len()
    }

    fn loss(&self, theta: &ParamVector, _batch: &Batch) -> f64 {
        let d = self.offset(theta);
        0.5 * d.iter().zip(self.apply(&d)).map(|(d, ad)| d * ad).sum::<f64>()
    }

    fn gradient(&self, theta: &ParamVector, _batch: &Batch) -> GradVector {
        GradVector::new(self.apply(&self.offset(theta)))
    }
}

/// Builds the quadratic bowl; rejects non-square, asymmetric or indefinite matrices.
pub fn make_quadratic(spec: QuadraticSpec) -> Result<Quadratic> {
    let n = spec.minimizer.len();
    let fail = |msg: String| Err(BfeError::InvalidConfig(msg));
    if n == 0 {
        return fail("quadratic needs at least one dimension".into());
    }
    if spec.matrix.len() != n || spec.matrix.iter().any(|row| row.len() != n) {
        return fail(format!("matrix must be {n}x{n} to match the minimizer"));
    }
    if spec.matrix.iter().flatten().chain(&spec.minimizer).any(|v| !v.is_finite()) {
        return fail("quadratic entries must be finite".into());
    }
    let scale = spec.matrix.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (spec.matrix[i][j] - spec.matrix[j][i]).abs() > 1e-12 * scale {
                return fail(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let dense = DMatrix::from_fn(n, n, |i, j| spec.matrix[i][j]);
    if dense.cholesky().is_none() {
        return fail("matrix is not positive definite".into());
    }
    Ok(Quadratic {
        matrix: spec.matrix,
        minimizer: spec.minimizer,
    })
}

/// Loss values on a regular lattice over a 2D parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major: `values[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
}

impl LandscapeGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }

    /// Lattice indices of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
        (k % self.xs.len(), k / self.xs.len())
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn landscape_grid<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    bounds: [(f64, f64); 2],
    resolution: [usize; 2],
) -> Result<LandscapeGrid> {
    if problem.dimension() != 2 {
        return Err(BfeError::DimensionMismatch {
            expected: 2,
            actual: problem.dimension(),
        });
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(BfeError::InvalidConfig("grid resolution must be at least 2 per axis".into()));
    }
    if bounds.iter().any(|&(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
        return Err(BfeError::InvalidConfig(format!("invalid grid bounds {bounds:?}")));
    }
    let xs = lattice(bounds[0].0, bounds[0].1, resolution[0]);
    let ys = lattice(bounds[1].0, bounds[1].1, resolution[1]);
    let values = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .map(|(x, y)| problem.loss(&ParamVector::new(vec![x, y]), batch))
        .collect();
    Ok(LandscapeGrid { xs, ys, values })
}
