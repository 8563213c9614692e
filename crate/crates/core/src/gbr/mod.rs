//! Per-quantile gradient-boosted regression trees with the pinball loss, one
//! independent learner per (quantile level, horizon step).
//!
//! Each learner starts from the empirical q-quantile of its targets. Every
//! stage fits a depth-bounded tree to the negative pinball gradient, re-fits
//! each leaf to the empirical q-quantile of the residuals it captured, and
//! advances the prediction by `learning_rate` times the tree output — a
//! convex combination toward a per-leaf loss minimizer, so the training loss
//! never increases.

mod tree;

pub use tree::{Node, TreeParams};

use chrono::NaiveDateTime;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::{empirical_quantile, pinball_unchecked};
use crate::types::{QuantileLevels, QuantileMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum GbrError {
    #[error("quantile level {0} must lie strictly inside (0,1)")]
    InvalidQuantile(f64),
    #[error("fitting requires a non-empty sample set")]
    EmptySampleSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model is missing a learner for step {step}, level {level}")]
    UntrainedModel { step: usize, level: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbrConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            max_depth: 5,
            n_estimators: 500,
            min_samples_leaf: 5,
        }
    }
}

impl GbrConfig {
    pub fn validate(&self) -> Result<(), GbrError> {
        if self.learning_rate <= 0.0
            || self.learning_rate > 1.0
            || self.max_depth == 0
            || self.n_estimators == 0
            || self.min_samples_leaf == 0
        {
            return Err(GbrError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Boosted ensemble for one (quantile level, horizon step) output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileLearner {
    pub q: f64,
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Node>,
    /// Mean training pinball loss after initialization and after each stage.
    pub loss_trace: Vec<f64>,
}

impl QuantileLearner {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut y = self.init;
        for tree in &self.trees {
            y += self.learning_rate * tree.predict(features);
        }
        y
    }
}

/// Fits the per-step learners for one quantile level. Row `i` of `inputs`
/// pairs with row `i` of `targets`; every target column gets its own
/// independent ensemble.
pub fn fit_quantile_gbr(
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    q: f64,
    cfg: &GbrConfig,
) -> Result<Vec<QuantileLearner>, GbrError> {
    cfg.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(GbrError::InvalidQuantile(q));
    }
    if inputs.nrows() == 0 {
        return Err(GbrError::EmptySampleSet);
    }
    if inputs.nrows() != targets.nrows() {
        return Err(GbrError::ShapeMismatch(format!(
            "{} input rows vs {} target rows",
            inputs.nrows(),
            targets.nrows()
        )));
    }
    let features: Vec<Vec<f64>> = inputs.rows().into_iter().map(|r| r.to_vec()).collect();
    let steps: Vec<usize> = (0..targets.ncols()).collect();
    steps
        .par_iter()
        .map(|&step| {
            let y: Vec<f64> = targets.column(step).to_vec();
            Ok(fit_single_output(&features, &y, q, cfg))
        })
        .collect()
}

fn fit_single_output(features: &[Vec<f64>], y: &[f64], q: f64, cfg: &GbrConfig) -> QuantileLearner {
    let n = y.len();
    let init = empirical_quantile(y, q);
    let mut prediction = vec![init; n];
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
    };

    let mean_loss = |pred: &[f64]| -> f64 {
        y.iter()
            .zip(pred)
            .map(|(&yi, &pi)| pinball_unchecked(q, yi, pi))
            .sum::<f64>()
            / n as f64
    };

    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut loss_trace = Vec::with_capacity(cfg.n_estimators + 1);
    loss_trace.push(mean_loss(&prediction));

    let mut gradients = vec![0.0; n];
    let mut residuals = vec![0.0; n];
    for _ in 0..cfg.n_estimators {
        for i in 0..n {
            // Negative gradient of the pinball loss w.r.t. the prediction.
            gradients[i] = if y[i] > prediction[i] { q } else { q - 1.0 };
            residuals[i] = y[i] - prediction[i];
        }
        let tree = tree::fit_tree(features, &gradients, &residuals, q, &params);
        for i in 0..n {
            prediction[i] += cfg.learning_rate * tree.predict(&features[i]);
        }
        trees.push(tree);
        loss_trace.push(mean_loss(&prediction));
    }
    QuantileLearner {
        q,
        init,
        learning_rate: cfg.learning_rate,
        trees,
        loss_trace,
    }
}

/// The full multi-output model: one learner per (level, step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrModel {
    pub levels: QuantileLevels,
    /// `learners[qi][step]`.
    pub learners: Vec<Vec<QuantileLearner>>,
}

impl GbrModel {
    /// Fits every quantile level; distinct (level, step) learners fit in
    /// parallel, collected in a fixed order.
    pub fn fit(
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        levels: &QuantileLevels,
        cfg: &GbrConfig,
    ) -> Result<Self, GbrError> {
        let per_level: Result<Vec<Vec<QuantileLearner>>, GbrError> = levels
            .as_slice()
            .par_iter()
            .map(|&q| fit_quantile_gbr(inputs, targets, q, cfg))
            .collect();
        Ok(Self {
            levels: levels.clone(),
            learners: per_level?,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.learners.first().map_or(0, |l| l.len())
    }

    /// Assembles the T x Q forecast for one input row and repairs quantile
    /// crossing.
    pub fn predict(
        &self,
        features: ArrayView1<'_, f64>,
        issue_time: NaiveDateTime,
        horizon_indices: Vec<usize>,
    ) -> Result<QuantileMatrix, GbrError> {
        let t = self.n_steps();
        if t == 0 || self.learners.len() != self.levels.len() {
            return Err(GbrError::UntrainedModel {
                step: 0,
                level: self.levels.as_slice().first().copied().unwrap_or(0.0),
            });
        }
        if horizon_indices.len() != t {
            return Err(GbrError::ShapeMismatch(format!(
                "{} horizon indices vs {} trained steps",
                horizon_indices.len(),
                t
            )));
        }
        let row = features.to_vec();
        let mut values = Array2::zeros((t, self.levels.len()));
        for (qi, level_learners) in self.learners.iter().enumerate() {
            if level_learners.len() != t {
                return Err(GbrError::UntrainedModel {
                    step: level_learners.len(),
                    level: self.levels.as_slice()[qi],
                });
            }
            for (step, learner) in level_learners.iter().enumerate() {
                values[(step, qi)] = learner.predict(&row);
            }
        }
        let mut zm = QuantileMatrix::new(issue_time, horizon_indices, self.levels.clone(), values)
            .map_err(|e| GbrError::ShapeMismatch(e.to_string()))?;
        zm.enforce_monotonicity();
        Ok(zm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn issue() -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2020-08-02T06:00:00", "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn small_cfg(stages: usize) -> GbrConfig {
        GbrConfig {
            learning_rate: 0.1,
            max_depth: 3,
            n_estimators: stages,
            min_samples_leaf: 2,
        }
    }

    #[test]
    fn constant_targets_are_predicted_from_stage_zero() {
        let inputs = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64);
        let targets = Array2::from_elem((10, 1), 3.5);
        let learners = fit_quantile_gbr(inputs.view(), targets.view(), 0.5, &small_cfg(5)).unwrap();
        assert_eq!(learners[0].init, 3.5);
        assert_eq!(learners[0].predict(&[99.0, -4.0]), 3.5);
    }

    #[test]
    fn stage_zero_is_the_empirical_quantile_and_exact_median_for_odd_counts() {
        let inputs = Array2::zeros((5, 1));
        let targets = array![[1.0], [9.0], [4.0], [2.0], [7.0]];
        let learners = fit_quantile_gbr(inputs.view(), targets.view(), 0.5, &small_cfg(1)).unwrap();
        assert_eq!(learners[0].init, 4.0);
    }

    #[test]
    fn training_loss_is_nonincreasing_across_stages() {
        let mut state = 0xdeadbeefu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let inputs = Array2::from_shape_fn((60, 3), |_| next());
        let targets = Array2::from_shape_fn((60, 2), |(i, _)| {
            2.0 * inputs[(i, 0)] + next() * 0.3
        });
        for q in [0.1, 0.5, 0.9] {
            let learners =
                fit_quantile_gbr(inputs.view(), targets.view(), q, &small_cfg(40)).unwrap();
            for learner in &learners {
                for w in learner.loss_trace.windows(2) {
                    assert!(
                        w[1] <= w[0] + 1e-12,
                        "loss increased from {} to {} at q={q}",
                        w[0],
                        w[1]
                    );
                }
            }
        }
    }

    #[test]
    fn two_cluster_toy_set_recovers_cluster_quantiles() {
        // Cluster A at feature 0, targets around 1; cluster B at feature 10,
        // targets around 5. After 50 stages the per-cluster prediction should
        // sit near the per-cluster empirical quantile.
        let mut state = 0x1234u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 100;
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            if i % 2 == 0 {
                rows.push(0.0);
                ys.push(1.0 + next());
            } else {
                rows.push(10.0);
                ys.push(5.0 + next());
            }
        }
        let inputs = Array2::from_shape_vec((n, 1), rows.clone()).unwrap();
        let targets = Array2::from_shape_vec((n, 1), ys.clone()).unwrap();
        let cfg = GbrConfig {
            learning_rate: 0.1,
            max_depth: 3,
            n_estimators: 50,
            min_samples_leaf: 5,
        };
        for q in [0.1, 0.5, 0.9] {
            let learners = fit_quantile_gbr(inputs.view(), targets.view(), q, &cfg).unwrap();
            let cluster_a: Vec<f64> = ys
                .iter()
                .zip(&rows)
                .filter(|(_, &r)| r < 5.0)
                .map(|(&y, _)| y)
                .collect();
            let cluster_b: Vec<f64> = ys
                .iter()
                .zip(&rows)
                .filter(|(_, &r)| r >= 5.0)
                .map(|(&y, _)| y)
                .collect();
            let qa = empirical_quantile(&cluster_a, q);
            let qb = empirical_quantile(&cluster_b, q);
            let pa = learners[0].predict(&[0.0]);
            let pb = learners[0].predict(&[10.0]);
            assert!((pa - qa).abs() < 0.05, "q={q}: cluster A {pa} vs {qa}");
            assert!((pb - qb).abs() < 0.05, "q={q}: cluster B {pb} vs {qb}");
        }
    }

    #[test]
    fn prediction_is_piecewise_constant_between_thresholds() {
        let inputs = Array2::from_shape_fn((30, 2), |(i, j)| (i * (j + 1)) as f64 * 0.37);
        let targets = Array2::from_shape_fn((30, 1), |(i, _)| ((i * i) % 11) as f64);
        let learners =
            fit_quantile_gbr(inputs.view(), targets.view(), 0.5, &small_cfg(20)).unwrap();
        let learner = &learners[0];
        let mut thresholds = Vec::new();
        for tree in &learner.trees {
            tree.thresholds_of(0, &mut thresholds);
        }
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Probe a point strictly between two adjacent thresholds.
        let (lo, hi) = (thresholds[0], thresholds[1]);
        if hi - lo > 1e-9 {
            let x1 = [lo + (hi - lo) * 0.25, 1.0];
            let x2 = [lo + (hi - lo) * 0.75, 1.0];
            assert_eq!(learner.predict(&x1), learner.predict(&x2));
        }
    }

    #[test]
    fn tree_depth_never_exceeds_the_configured_bound() {
        let inputs = Array2::from_shape_fn((80, 4), |(i, j)| ((i * 7 + j * 13) % 23) as f64);
        let targets = Array2::from_shape_fn((80, 1), |(i, _)| ((i * 5) % 17) as f64);
        let cfg = small_cfg(25);
        let learners = fit_quantile_gbr(inputs.view(), targets.view(), 0.3, &cfg).unwrap();
        for tree in &learners[0].trees {
            assert!(tree.depth() <= cfg.max_depth);
        }
    }

    #[test]
    fn model_predicts_per_step_quantiles_from_stage_zero() {
        // With zero boosting effect (constant targets), every row of the
        // matrix is the vector of per-step empirical quantiles.
        let inputs = Array2::from_shape_fn((9, 2), |(i, _)| i as f64);
        let mut targets = Array2::zeros((9, 3));
        for i in 0..9 {
            targets[(i, 0)] = i as f64; // 0..8 -> deciles are interpolated
            targets[(i, 1)] = 10.0;
            targets[(i, 2)] = 2.0 * i as f64;
        }
        let levels = QuantileLevels::new(vec![0.25, 0.5, 0.75]).unwrap();
        let cfg = GbrConfig {
            learning_rate: 0.1,
            max_depth: 2,
            n_estimators: 1,
            min_samples_leaf: 9, // no split possible: pure initialization
        };
        let model = GbrModel::fit(inputs.view(), targets.view(), &levels, &cfg).unwrap();
        let zm = model.predict(inputs.row(0), issue(), vec![0, 1, 2]).unwrap();
        for (step, expected) in [(0usize, [2.0, 4.0, 6.0]), (1, [10.0, 10.0, 10.0])] {
            for (qi, &e) in expected.iter().enumerate() {
                assert!((zm.values()[(step, qi)] - e).abs() < 1e-12);
            }
        }
        assert!(zm.is_monotone());
    }

    #[test]
    fn prediction_is_deterministic_and_matches_tree_walk_oracle() {
        let inputs = Array2::from_shape_fn((40, 3), |(i, j)| ((i + 2 * j) % 13) as f64);
        let targets = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 3 + j) % 7) as f64);
        let levels = QuantileLevels::new(vec![0.2, 0.8]).unwrap();
        let model = GbrModel::fit(inputs.view(), targets.view(), &levels, &small_cfg(10)).unwrap();

        // Naive recursive walk, summing scaled tree outputs.
        fn walk(node: &Node, x: &[f64]) -> f64 {
            match node {
                Node::Leaf { value } => *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if x[*feature] <= *threshold {
                        walk(left, x)
                    } else {
                        walk(right, x)
                    }
                }
            }
        }
        for i in 0..10 {
            let x = inputs.row(i).to_vec();
            let a = model.predict(inputs.row(i), issue(), vec![0, 1]).unwrap();
            let b = model.predict(inputs.row(i), issue(), vec![0, 1]).unwrap();
            assert_eq!(a, b);
            for (qi, level_learners) in model.learners.iter().enumerate() {
                for (step, learner) in level_learners.iter().enumerate() {
                    let mut expected = learner.init;
                    for tree in &learner.trees {
                        expected += learner.learning_rate * walk(tree, &x);
                    }
                    // Compare against the pre-sort per-learner prediction.
                    let direct = learner.predict(&x);
                    assert!((direct - expected).abs() < 1e-12, "step {step} q {qi}");
                }
            }
        }
    }

    #[test]
    fn untrained_model_is_rejected_at_prediction() {
        let model = GbrModel {
            levels: QuantileLevels::deciles(),
            learners: vec![],
        };
        let x = ndarray::Array1::zeros(3);
        assert!(matches!(
            model.predict(x.view(), issue(), vec![0]),
            Err(GbrError::UntrainedModel { .. })
        ));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let inputs = Array2::zeros((4, 2));
        let targets = Array2::zeros((4, 1));
        assert!(matches!(
            fit_quantile_gbr(inputs.view(), targets.view(), 1.2, &small_cfg(2)),
            Err(GbrError::InvalidQuantile(_))
        ));
        let empty_in = Array2::zeros((0, 2));
        let empty_t = Array2::zeros((0, 1));
        assert!(matches!(
            fit_quantile_gbr(empty_in.view(), empty_t.view(), 0.5, &small_cfg(2)),
            Err(GbrError::EmptySampleSet)
        ));
        let bad = GbrConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            fit_quantile_gbr(inputs.view(), targets.view(), 0.5, &bad),
            Err(GbrError::InvalidConfig(_))
        ));
    }
}
