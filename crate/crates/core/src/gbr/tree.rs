//! Depth-bounded regression trees fit on negative pinball gradients with
//! variance-reduction splits, leaves re-fit to the empirical quantile of the
//! residuals they hold.

use serde::{Deserialize, Serialize};

use crate::loss::empirical_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, features: &[f64]) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if features[*feature] <= *threshold {
                    left.predict(features)
                } else {
                    right.predict(features)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Thresholds used anywhere in the tree for one feature; test hook for
    /// the piecewise-constant property.
    pub fn thresholds_of(&self, feature: usize, out: &mut Vec<f64>) {
        if let Node::Split {
            feature: f,
            threshold,
            left,
            right,
        } = self
        {
            if *f == feature {
                out.push(*threshold);
            }
            left.thresholds_of(feature, out);
            right.thresholds_of(feature, out);
        }
    }
}

pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Fits a tree on (features, gradient targets), then replaces every leaf
/// value with the empirical q-quantile of `residuals` over the samples the
/// leaf captured. The gradient carries the split geometry, the residual
/// quantile carries the loss adaptation.
pub fn fit_tree(
    features: &[Vec<f64>],
    gradients: &[f64],
    residuals: &[f64],
    q: f64,
    params: &TreeParams,
) -> Node {
    let indices: Vec<usize> = (0..gradients.len()).collect();
    build(features, gradients, residuals, q, &indices, 0, params)
}

fn build(
    features: &[Vec<f64>],
    gradients: &[f64],
    residuals: &[f64],
    q: f64,
    indices: &[usize],
    depth: usize,
    params: &TreeParams,
) -> Node {
    if depth >= params.max_depth || indices.len() < 2 * params.min_samples_leaf {
        return leaf(residuals, q, indices);
    }
    match best_split(features, gradients, indices, params.min_samples_leaf) {
        None => leaf(residuals, q, indices),
        Some((feature, threshold)) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| features[i][feature] <= threshold);
            let left = build(features, gradients, residuals, q, &left_idx, depth + 1, params);
            let right = build(
                features, gradients, residuals, q, &right_idx, depth + 1, params,
            );
            Node::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

fn leaf(residuals: &[f64], q: f64, indices: &[usize]) -> Node {
    let vals: Vec<f64> = indices.iter().map(|&i| residuals[i]).collect();
    Node::Leaf {
        value: empirical_quantile(&vals, q),
    }
}

/// Exhaustive threshold scan at observed feature values, maximizing the
/// variance reduction of the gradient targets. Ties keep the lowest feature
/// index, then the lowest threshold (strict improvement required).
#[allow(clippy::needless_range_loop)] // the feature number is the split payload
fn best_split(
    features: &[Vec<f64>],
    gradients: &[f64],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = indices.len();
    let n_features = features[indices[0]].len();
    let total_sum: f64 = indices.iter().map(|&i| gradients[i]).sum();
    let total_sq: f64 = indices.iter().map(|&i| gradients[i] * gradients[i]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..n_features {
        order.clear();
        order.extend(indices.iter().map(|&i| (features[i][feature], gradients[i])));
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite feature value"));

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for (pos, &(value, g)) in order.iter().enumerate() {
            left_sum += g;
            left_sq += g * g;
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            // Only split between distinct observed values.
            if order[pos + 1].0 <= value {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            let gain = parent_sse - sse;
            if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                best = Some((gain, feature, value));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn pure_gradients_yield_a_leaf() {
        let feats = column(&[1.0, 2.0, 3.0, 4.0]);
        let grads = [0.5, 0.5, 0.5, 0.5];
        let residuals = [1.0, 2.0, 3.0, 4.0];
        let params = TreeParams {
            max_depth: 3,
            min_samples_leaf: 1,
        };
        let tree = fit_tree(&feats, &grads, &residuals, 0.5, &params);
        assert_eq!(tree.depth(), 0);
        // Leaf value is the median of the residuals.
        assert_eq!(tree.predict(&[2.0]), 2.5);
    }

    #[test]
    fn two_cluster_split_recovers_the_boundary() {
        let feats = column(&[0.0, 0.1, 0.2, 0.3, 10.0, 10.1, 10.2, 10.3]);
        let grads = [-0.5, -0.5, -0.5, -0.5, 0.5, 0.5, 0.5, 0.5];
        let residuals = [1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0];
        let params = TreeParams {
            max_depth: 4,
            min_samples_leaf: 2,
        };
        let tree = fit_tree(&feats, &grads, &residuals, 0.5, &params);
        assert_eq!(tree.predict(&[0.15]), 1.0);
        assert_eq!(tree.predict(&[10.15]), 9.0);
        match &tree {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(*threshold >= 0.3 && *threshold < 10.0);
            }
            Node::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn depth_limit_is_respected() {
        let n = 64;
        let feats: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let grads: Vec<f64> = (0..n).map(|i| (i % 7) as f64 - 3.0).collect();
        let residuals = grads.clone();
        let params = TreeParams {
            max_depth: 3,
            min_samples_leaf: 1,
        };
        let tree = fit_tree(&feats, &grads, &residuals, 0.3, &params);
        assert!(tree.depth() <= 3);
    }

    #[test]
    fn min_samples_leaf_blocks_tiny_leaves() {
        let feats = column(&[0.0, 1.0, 2.0, 3.0]);
        let grads = [0.0, 0.0, 0.0, 5.0];
        let residuals = [0.0, 0.0, 0.0, 5.0];
        let params = TreeParams {
            max_depth: 5,
            min_samples_leaf: 3,
        };
        // A split would leave one side with fewer than 3 samples.
        let tree = fit_tree(&feats, &grads, &residuals, 0.5, &params);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn equal_gain_ties_prefer_the_lowest_feature() {
        // Two identical features: feature 0 must win the tie.
        let feats: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0]
            .iter()
            .map(|&v| vec![v, v])
            .collect();
        let grads = vec![-1.0, -1.0, 1.0, 1.0];
        let residuals = grads.clone();
        let params = TreeParams {
            max_depth: 1,
            min_samples_leaf: 1,
        };
        let tree = fit_tree(&feats, &grads, &residuals, 0.5, &params);
        match tree {
            Node::Split { feature, .. } => assert_eq!(feature, 0),
            Node::Leaf { .. } => panic!("expected a split"),
        }
    }
}
