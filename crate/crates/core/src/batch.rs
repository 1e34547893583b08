use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{BfeError, Result};

/// A set of (feature row, target) pairs. Also used for whole datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Batch {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(BfeError::InvalidData("batch must contain at least one row".into()));
        }
        if features.len() != targets.len() {
            return Err(BfeError::InvalidData(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let width = features[0].len();
        if features.iter().any(|row| row.len() != width) {
            return Err(BfeError::InvalidData("ragged feature rows".into()));
        }
        Ok(Self { features, targets })
    }

    /// One featureless row. Data-free problems (quadratic bowls) ignore the batch
    /// entirely; this is what gets passed to them.
    pub fn unit() -> Self {
        Self {
            features: vec![Vec::new()],
            targets: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features
            .iter()
            .map(Vec::as_slice)
            .zip(self.targets.iter().copied())
    }

    fn select(&self, indices: &[usize]) -> Batch {
        Batch {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Endless stream of mini-batches: each epoch is a fresh shuffle of the dataset
/// drawn from a ChaCha8 generator seeded once, cut into `batch_size` chunks
/// (the last one may be short).
#[derive(Debug, Clone)]
pub struct BatchStream<'a> {
    dataset: &'a Batch,
    batch_size: usize,
    rng: ChaCha8Rng,
    epoch: Vec<Batch>,
    cursor: usize,
}

impl<'a> BatchStream<'a> {
    pub fn new(dataset: &'a Batch, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(BfeError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(Self {
            dataset,
            batch_size: batch_size.min(dataset.len()),
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: Vec::new(),
            cursor: 0,
        })
    }

    /// Batches of the next full epoch.
    pub fn next_epoch(&mut self) -> Vec<Batch> {
        let mut order: Vec<usize> = (0..self.dataset.len()).collect();
        order.shuffle(&mut self.rng);
        order
            .chunks(self.batch_size)
            .map(|chunk| self.dataset.select(chunk))
            .collect()
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.cursor == self.epoch.len() {
            self.epoch = self.next_epoch();
            self.cursor = 0;
        }
        self.cursor += 1;
        self.epoch[self.cursor - 1].clone()
    }
}

/// One shuffled epoch of mini-batches. A `batch_size` larger than the dataset yields
/// a single batch holding every row.
pub fn mini_batches(dataset: &Batch, batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    Ok(BatchStream::new(dataset, batch_size, seed)?.next_epoch())
}
