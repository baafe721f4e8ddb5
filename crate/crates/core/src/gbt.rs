//! Gradient-boosted regression trees with a second-order objective.
//!
//! Squared-error loss, so per-round gradients are `g_i = pred_i - y_i` with
//! unit hessians. Trees are grown by exact greedy split search over midpoint
//! thresholds; split gain and leaf weights use the closed-form regularized
//! objective (L2 leaf penalty `lambda`, per-leaf penalty `gamma`). Splits with
//! non-positive gain are rejected, which together with a learning rate of at
//! most one keeps training RMSE non-increasing round over round.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::series::{FeatureMatrix, MonthlySeries};
use crate::{Error, Result};

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Shrinkage applied to every tree's contribution; in (0, 1].
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Per-leaf penalty subtracted from each split gain.
    pub gamma: f64,
    /// Minimum hessian mass per child (row count under squared loss).
    pub min_child_weight: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_estimators: 300,
            max_depth: 2,
            learning_rate: 0.11,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::config("n_estimators must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("learning_rate must lie in (0, 1]"));
        }
        if self.lambda < 0.0 || self.gamma < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::config(
                "lambda, gamma, min_child_weight must be >= 0",
            ));
        }
        Ok(())
    }
}

/// One regression tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: String,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Leaf weight on the routing path for a row; rows go left when the
    /// feature value is strictly below the threshold.
    pub fn route(&self, row: &FeatureRow) -> Result<f64> {
        match self {
            TreeNode::Leaf { weight } => Ok(*weight),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let value = row.get(feature).ok_or_else(|| Error::MissingFeature {
                    name: feature.clone(),
                })?;
                if *value < *threshold {
                    left.route(row)
                } else {
                    right.route(row)
                }
            }
        }
    }

    fn route_matrix(&self, features: &FeatureMatrix, row: usize) -> f64 {
        match self {
            TreeNode::Leaf { weight } => *weight,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let value = features.column(feature).expect("fit-time feature")[row];
                if value < *threshold {
                    left.route_matrix(features, row)
                } else {
                    right.route_matrix(features, row)
                }
            }
        }
    }
}

/// A prediction input: feature values keyed by name.
pub type FeatureRow = HashMap<String, f64>;

/// Trained boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
    pub trees: Vec<TreeNode>,
    /// Echo of the fitting configuration.
    pub config: GbtConfig,
}

impl GbtEnsemble {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("model json: {e}")))
    }
}

/// Fit outcome: the model plus per-round training diagnostics.
#[derive(Debug, Clone)]
pub struct GbtFit {
    pub model: GbtEnsemble,
    /// Training RMSE after each boosting round.
    pub training_rmse: Vec<f64>,
    /// Final fit-time predictions on the training rows.
    pub train_predictions: Vec<f64>,
}

struct SplitChoice {
    feature_index: usize,
    threshold: f64,
    gain: f64,
    left_rows: Vec<usize>,
    right_rows: Vec<usize>,
}

/// True when `gain` beats `best` by more than summation noise. Two features
/// inducing the same row partition have mathematically equal gains but can
/// differ by an ulp from the different accumulation orders; treating that as
/// a tie keeps the lowest-index, lowest-threshold winner stable.
pub(crate) fn beats(gain: f64, best: f64) -> bool {
    gain > best + 1e-12 * best.abs().max(1.0)
}

/// Fits a boosted ensemble on aligned features and targets.
///
/// The seed is part of the signature for API stability; fitting is exact and
/// deterministic (no row or column subsampling), with split ties broken by
/// lowest feature index then lowest threshold.
pub fn fit_gbt(
    features: &FeatureMatrix,
    targets: &MonthlySeries,
    config: &GbtConfig,
    _seed: u64,
) -> Result<GbtFit> {
    config.validate()?;
    if features.names().is_empty() {
        return Err(Error::config("no feature columns"));
    }
    if features.start() != targets.start() || features.row_count() != targets.len() {
        return Err(Error::alignment(format!(
            "features start {} ({} rows) vs targets start {} ({} rows)",
            features.start(),
            features.row_count(),
            targets.start(),
            targets.len()
        )));
    }
    let n = targets.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            actual: n,
            required: 2,
        });
    }

    let y = targets.values();
    let base_score = y.iter().sum::<f64>() / n as f64;
    let mut preds = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut training_rmse = Vec::with_capacity(config.n_estimators);

    for _ in 0..config.n_estimators {
        let grad: Vec<f64> = preds.iter().zip(y).map(|(p, t)| p - t).collect();
        let hess = vec![1.0; n];
        let all_rows: Vec<usize> = (0..n).collect();
        let tree = grow_node(features, &grad, &hess, &all_rows, 0, config);
        for (i, pred) in preds.iter_mut().enumerate() {
            *pred += config.learning_rate * tree.route_matrix(features, i);
        }
        trees.push(tree);
        let mse = preds
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64;
        training_rmse.push(mse.sqrt());
    }

    Ok(GbtFit {
        model: GbtEnsemble {
            base_score,
            learning_rate: config.learning_rate,
            feature_names: features.names().to_vec(),
            trees,
            config: *config,
        },
        training_rmse,
        train_predictions: preds,
    })
}

fn grow_node(
    features: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    depth: usize,
    config: &GbtConfig,
) -> TreeNode {
    let g_sum: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_sum: f64 = rows.iter().map(|&i| hess[i]).sum();
    let leaf = || TreeNode::Leaf {
        weight: -g_sum / (h_sum + config.lambda),
    };

    if depth >= config.max_depth || rows.len() < 2 {
        return leaf();
    }
    let Some(split) = best_split(features, grad, hess, rows, g_sum, h_sum, config) else {
        return leaf();
    };

    let left = grow_node(features, grad, hess, &split.left_rows, depth + 1, config);
    let right = grow_node(features, grad, hess, &split.right_rows, depth + 1, config);
    TreeNode::Split {
        feature: features.names()[split.feature_index].clone(),
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Exact greedy search over every feature and every midpoint threshold.
fn best_split(
    features: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    g_sum: f64,
    h_sum: f64,
    config: &GbtConfig,
) -> Option<SplitChoice> {
    let parent_score = g_sum * g_sum / (h_sum + config.lambda);
    let mut best: Option<SplitChoice> = None;

    for f in 0..features.names().len() {
        let col = features.column_by_index(f);
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));

        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for k in 0..order.len() - 1 {
            g_left += grad[order[k]];
            h_left += hess[order[k]];
            let (lo, hi) = (col[order[k]], col[order[k + 1]]);
            if lo == hi {
                continue; // boundary inside a tied value group
            }
            let h_right = h_sum - h_left;
            if h_left < config.min_child_weight || h_right < config.min_child_weight {
                continue;
            }
            let g_right = g_sum - g_left;
            let gain = 0.5
                * (g_left * g_left / (h_left + config.lambda)
                    + g_right * g_right / (h_right + config.lambda)
                    - parent_score)
                - config.gamma;
            // ascending feature/threshold iteration makes `beats` the
            // lowest-index, lowest-threshold tie-break
            if gain > 0.0 && best.as_ref().is_none_or(|b| beats(gain, b.gain)) {
                let threshold = lo + 0.5 * (hi - lo);
                best = Some(SplitChoice {
                    feature_index: f,
                    threshold,
                    gain,
                    left_rows: order[..=k].to_vec(),
                    right_rows: order[k + 1..].to_vec(),
                });
            }
        }
    }
    best
}

/// Ensemble prediction for one row:
/// `base_score + learning_rate * sum of per-tree leaf weights`, accumulated
/// tree by tree in boosting order so it reproduces fit-time predictions
/// bit for bit.
pub fn predict_gbt(model: &GbtEnsemble, row: &FeatureRow) -> Result<f64> {
    let mut acc = model.base_score;
    for tree in &model.trees {
        acc += model.learning_rate * tree.route(row)?;
    }
    Ok(acc)
}
