use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tree::{grow, Presorted, RegressionTree};
use super::{mean_absolute_error, split_dataset, FeatureMatrix, Target, TrainConfig};

/// Boosted ensemble: `base_prediction` plus `learning_rate` times each tree's
/// output, accumulated tree by tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel<T> {
    pub target: Target,
    pub base_prediction: T,
    pub learning_rate: T,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub n_features: usize,
    pub validation_mae: f64,
    pub trees: Vec<RegressionTree<T>>,
}

impl<T: Scalar> GbdtModel<T> {
    /// A model with no trees; predicts `base_prediction` everywhere.
    pub fn constant(target: Target, base_prediction: T, n_features: usize) -> Self {
        Self {
            target,
            base_prediction,
            learning_rate: T::from_f64_lossy(0.1),
            n_estimators: 0,
            max_depth: 1,
            n_features,
            validation_mae: 0.0,
            trees: Vec::new(),
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[T]) -> T {
        let mut acc = self.base_prediction;
        for t in &self.trees {
            acc = acc + self.learning_rate * t.predict_row(row);
        }
        acc
    }

    pub fn predict(&self, features: &FeatureMatrix<T>) -> Result<Vec<T>> {
        if features.width() != self.n_features {
            return Err(Error::validation(format!(
                "feature width {} does not match model width {}",
                features.width(),
                self.n_features
            )));
        }
        Ok((0..features.rows()).map(|i| self.predict_row(features.row(i))).collect())
    }

    /// Predicts into `out` for rows laid out contiguously in `rows` (row-major).
    pub fn predict_flat(&self, rows: &[T], out: &mut Vec<T>) -> Result<()> {
        if self.n_features == 0 || rows.len() % self.n_features != 0 {
            return Err(Error::validation("flat feature buffer does not match model width"));
        }
        out.clear();
        out.extend(rows.chunks_exact(self.n_features).map(|r| self.predict_row(r)));
        Ok(())
    }
}

/// Outcome of evaluating one candidate depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthCandidate {
    pub depth: usize,
    pub validation_mae: f64,
    /// Training SSE before the first round and after each round.
    pub train_sse: Vec<f64>,
    /// Set when no tree at a shallower depth ever hit its depth limit, which
    /// makes this candidate's ensemble identical to that shallower one.
    pub same_as_depth: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub model: GbdtModel<T>,
    pub candidates: Vec<DepthCandidate>,
}

fn sse<T: Scalar>(pred: &[T], y: &[T]) -> f64 {
    pred.iter().zip(y).map(|(&p, &t)| (t.as_f64() - p.as_f64()).powi(2)).sum()
}

struct Boosted<T> {
    model: GbdtModel<T>,
    train_sse: Vec<f64>,
    depth_bound: bool,
}

fn boost<T: Scalar>(
    pre: &Presorted<T>,
    train: &FeatureMatrix<T>,
    target: Target,
    depth: usize,
    cfg: &TrainConfig,
) -> Boosted<T> {
    let y = train.targets();
    let n = pre.rows();
    let base = y.iter().fold(T::zero(), |a, &v| a + v) / T::from_count(n);
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let mut pred = vec![base; n];
    let mut residuals = vec![T::zero(); n];
    let mut train_sse = Vec::with_capacity(cfg.n_estimators + 1);
    train_sse.push(sse(&pred, y));
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut depth_bound = false;
    for _ in 0..cfg.n_estimators {
        for ((r, &t), &p) in residuals.iter_mut().zip(y).zip(&pred) {
            *r = t - p;
        }
        let grown = grow(pre, &residuals, depth, cfg.min_samples_leaf, |rows, value| {
            let step = lr * value;
            for &i in rows {
                pred[i as usize] = pred[i as usize] + step;
            }
        });
        depth_bound |= grown.depth_bound;
        trees.push(grown.tree);
        train_sse.push(sse(&pred, y));
    }
    let model = GbdtModel {
        target,
        base_prediction: base,
        learning_rate: lr,
        n_estimators: cfg.n_estimators,
        max_depth: depth,
        n_features: train.width(),
        validation_mae: f64::NAN,
        trees,
    };
    Boosted { model, train_sse, depth_bound }
}

/// Trains and returns every candidate's diagnostics alongside the selected model.
///
/// Each depth in `cfg.depth_range` gets a full boosting run on the training
/// part; the depth with the lowest validation MAE wins, ties to the smaller
/// depth. Once a depth produces no tree that was cut short by its limit, all
/// deeper candidates would grow the same ensemble and reuse its result.
pub fn train_with_report<T: Scalar>(data: &Dataset, target: Target, cfg: &TrainConfig) -> Result<TrainReport<T>> {
    cfg.validate()?;
    let (train, valid) = split_dataset::<T>(data, target, cfg)?;
    let pre = Presorted::new(&train);

    let mut candidates = Vec::new();
    let mut best: Option<GbdtModel<T>> = None;
    let mut saturated: Option<(usize, f64, Vec<f64>)> = None;
    for depth in cfg.depth_range.clone() {
        if let Some((from, mae, hist)) = &saturated {
            candidates.push(DepthCandidate {
                depth,
                validation_mae: *mae,
                train_sse: hist.clone(),
                same_as_depth: Some(*from),
            });
            continue;
        }
        let run = boost(&pre, &train, target, depth, cfg);
        let pred = run.model.predict(&valid)?;
        let mae = mean_absolute_error(&pred, valid.targets());
        if !run.depth_bound {
            saturated = Some((depth, mae, run.train_sse.clone()));
        }
        candidates.push(DepthCandidate { depth, validation_mae: mae, train_sse: run.train_sse, same_as_depth: None });
        if best.as_ref().is_none_or(|b| mae < b.validation_mae) {
            let mut model = run.model;
            model.validation_mae = mae;
            best = Some(model);
        }
    }
    let model = best.ok_or_else(|| Error::Config("empty depth range".into()))?;
    Ok(TrainReport { model, candidates })
}

/// Trains one predictor with validation-MAE depth selection.
pub fn train<T: Scalar>(data: &Dataset, target: Target, cfg: &TrainConfig) -> Result<GbdtModel<T>> {
    train_with_report(data, target, cfg).map(|r| r.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::generate_dataset;
    use crate::oracle::tests::sss_oracle;

    fn small_cfg(depths: std::ops::RangeInclusive<usize>) -> TrainConfig {
        TrainConfig { n_estimators: 20, depth_range: depths, ..TrainConfig::default() }
    }

    #[test]
    fn zero_tree_model_predicts_base() {
        let m = GbdtModel::<f64>::constant(Target::Ssim, 0.75, 7);
        let x = FeatureMatrix::from_rows(&[vec![1.0; 7], vec![2.0; 7]], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![0.75, 0.75]);
        let bad = FeatureMatrix::from_rows(&[vec![1.0; 6]], vec![0.0]).unwrap();
        assert!(matches!(m.predict(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn constant_target() {
        let mut d = generate_dataset(&sss_oracle(2), 200).unwrap();
        for s in &mut d.samples {
            s.outcome.ssim = 0.5;
        }
        let m = train::<f64>(&d, Target::Ssim, &small_cfg(1..=3)).unwrap();
        assert_eq!(m.validation_mae, 0.0);
        assert_eq!(m.max_depth, 1);
        let x = FeatureMatrix::<f64>::from_dataset(&d, Target::Ssim);
        assert!(m.predict(&x).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn degenerate_range_skips_search() {
        let d = generate_dataset(&sss_oracle(2), 300).unwrap();
        let r = train_with_report::<f64>(&d, Target::TimeMs, &small_cfg(3..=3)).unwrap();
        assert_eq!(r.model.max_depth, 3);
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.model.trees.len(), 20);
    }

    #[test]
    fn empty_range_is_config_error() {
        let d = generate_dataset(&sss_oracle(2), 300).unwrap();
        #[allow(clippy::reversed_empty_ranges)]
        let cfg = small_cfg(5..=4);
        assert!(matches!(train::<f64>(&d, Target::Ssim, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn selection_is_argmin_and_sse_monotone() {
        let d = generate_dataset(&sss_oracle(4), 1500).unwrap();
        let cfg = small_cfg(1..=8);
        let r = train_with_report::<f64>(&d, Target::TimeMs, &cfg).unwrap();
        let min = r.candidates.iter().map(|c| c.validation_mae).fold(f64::INFINITY, f64::min);
        let first = r.candidates.iter().find(|c| c.validation_mae == min).unwrap();
        assert_eq!(r.model.max_depth, first.depth);
        assert_eq!(r.model.validation_mae, min);
        for c in &r.candidates {
            assert_eq!(c.train_sse.len(), cfg.n_estimators + 1);
            assert!(c.train_sse.windows(2).all(|w| w[1] <= w[0]), "depth {}", c.depth);
        }
        // re-evaluate one candidate independently
        let (train, valid) = split_dataset::<f64>(&d, Target::TimeMs, &cfg).unwrap();
        let pre = Presorted::new(&train);
        let run = boost(&pre, &train, Target::TimeMs, 2, &cfg);
        let mae = mean_absolute_error(&run.model.predict(&valid).unwrap(), valid.targets());
        assert_eq!(mae, r.candidates[1].validation_mae);
    }

    #[test]
    fn saturated_depths_match_full_runs() {
        let d = generate_dataset(&sss_oracle(4).noiseless(), 400).unwrap();
        let cfg = small_cfg(1..=12);
        let r = train_with_report::<f64>(&d, Target::Ssim, &cfg).unwrap();
        let (train, valid) = split_dataset::<f64>(&d, Target::Ssim, &cfg).unwrap();
        let pre = Presorted::new(&train);
        for c in r.candidates.iter().filter(|c| c.same_as_depth.is_some()) {
            let run = boost(&pre, &train, Target::Ssim, c.depth, &cfg);
            let mae = mean_absolute_error(&run.model.predict(&valid).unwrap(), valid.targets());
            assert_eq!(mae, c.validation_mae);
            assert_eq!(run.train_sse, c.train_sse);
        }
    }

    #[test]
    fn f32_and_f64_agree_roughly() {
        let d = generate_dataset(&sss_oracle(4), 800).unwrap();
        let cfg = small_cfg(4..=4);
        let a = train::<f32>(&d, Target::TimeMs, &cfg).unwrap();
        let b = train::<f64>(&d, Target::TimeMs, &cfg).unwrap();
        assert!((a.validation_mae - b.validation_mae).abs() < 0.05 * b.validation_mae.max(1e-3));
    }
}
