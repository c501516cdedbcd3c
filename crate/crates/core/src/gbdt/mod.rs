//! Gradient-boosted regression trees for the quality and time predictors.

mod boost;
mod io;
mod tree;

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::ConfigPoint;

pub use boost::{train, train_with_report, DepthCandidate, GbdtModel, TrainReport};
pub use io::{load_model, save_model};
pub use tree::{fit_tree, Node, RegressionTree};

/// Which rendering outcome a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "ssim")]
    Ssim,
    #[serde(rename = "time_ms")]
    TimeMs,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Ssim => "ssim",
            Target::TimeMs => "time_ms",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssim" => Ok(Target::Ssim),
            "time" | "time_ms" => Ok(Target::TimeMs),
            other => Err(Error::Config(format!("unknown target `{other}` (expected ssim or time)"))),
        }
    }
}

/// Row-major features with a parallel target column.
///
/// Column order: parameter level indices, LOD index, CPU MHz, GPU MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    width: usize,
    data: Vec<T>,
    targets: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(width: usize) -> Self {
        Self { width, data: Vec::new(), targets: Vec::new() }
    }

    pub fn with_capacity(width: usize, rows: usize) -> Self {
        Self { width, data: Vec::with_capacity(width * rows), targets: Vec::with_capacity(rows) }
    }

    pub fn from_rows(rows: &[Vec<T>], targets: Vec<T>) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.len() != targets.len() {
            return Err(Error::validation("row and target counts differ"));
        }
        let mut m = Self::with_capacity(width, rows.len());
        for (row, &t) in rows.iter().zip(&targets) {
            m.push(row, t)?;
        }
        Ok(m)
    }

    pub fn from_dataset(data: &Dataset, target: Target) -> Self {
        let width = data.space.dim_count() + 3;
        let mut m = Self::with_capacity(width, data.len());
        for s in &data.samples {
            let y = match target {
                Target::Ssim => s.outcome.ssim,
                Target::TimeMs => s.outcome.time_ms,
            };
            m.data.extend(point_features::<T>(&s.point));
            m.targets.push(T::from_f64_lossy(y));
        }
        m
    }

    pub fn push(&mut self, row: &[T], target: T) -> Result<()> {
        if row.len() != self.width {
            return Err(Error::validation(format!("row width {} != {}", row.len(), self.width)));
        }
        self.data.extend_from_slice(row);
        self.targets.push(target);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub(crate) fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows()).map(|i| self.data[i * self.width + j]).collect()
    }
}

/// Model input for one configuration point.
pub fn point_features<T: Scalar>(p: &ConfigPoint) -> impl Iterator<Item = T> + '_ {
    p.params
        .indices()
        .iter()
        .map(|&i| T::from_count(i))
        .chain([T::from_count(p.lod), T::from_f64_lossy(p.cpu_freq), T::from_f64_lossy(p.gpu_freq)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub depth_range: RangeInclusive<usize>,
    /// Train and validation parts of the split, e.g. `(7, 3)`.
    pub split: (u32, u32),
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.1,
            depth_range: 1..=30,
            split: (7, 3),
            min_samples_leaf: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_range.is_empty() || *self.depth_range.start() == 0 {
            return Err(Error::Config("depth range must be non-empty and start at 1 or above".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must lie in (0, 1]".into()));
        }
        if self.split.0 == 0 || self.split.1 == 0 {
            return Err(Error::Config("both split parts must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seeded shuffle, then the leading `split.0 / (split.0 + split.1)` share
/// (rounded down) becomes the training part.
pub fn split_dataset<T: Scalar>(
    data: &Dataset,
    target: Target,
    cfg: &TrainConfig,
) -> Result<(FeatureMatrix<T>, FeatureMatrix<T>)> {
    let n = data.len();
    if n < 10 {
        return Err(Error::Training(format!("dataset has {n} samples, need at least 10")));
    }
    let (a, b) = cfg.split;
    if a == 0 || b == 0 {
        return Err(Error::Config("both split parts must be positive".into()));
    }
    let n_train = (n as u64 * a as u64 / (a as u64 + b as u64)) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Training("split leaves one side empty".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let all = FeatureMatrix::<T>::from_dataset(data, target);
    let mut train = FeatureMatrix::with_capacity(all.width(), n_train);
    let mut valid = FeatureMatrix::with_capacity(all.width(), n - n_train);
    for (k, &i) in order.iter().enumerate() {
        let dst = if k < n_train { &mut train } else { &mut valid };
        dst.push(all.row(i), all.targets()[i])?;
    }
    Ok((train, valid))
}

pub(crate) fn mean_absolute_error<T: Scalar>(pred: &[T], truth: &[T]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let total: f64 = pred.iter().zip(truth).map(|(&p, &t)| (p.as_f64() - t.as_f64()).abs()).sum();
    total / pred.len() as f64
}
