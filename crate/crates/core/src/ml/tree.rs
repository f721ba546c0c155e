use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, best_split, Classifier, Dataset, MlError, Prediction, TrainConfig};

/// A CART node. Serialized compactly as `{f, t, l, r}` or `{counts}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TreeNode {
    Internal {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: Box<TreeNode>,
        #[serde(rename = "r")]
        right: Box<TreeNode>,
    },
    Leaf {
        counts: Vec<u64>,
    },
}

impl TreeNode {
    pub fn leaf(&self, x: &[f64]) -> &[u64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                TreeNode::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the leaf reached by `x`; lowest id on ties.
    pub fn vote(&self, x: &[f64]) -> usize {
        let counts = self.leaf(x);
        let scores: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        argmax_lowest(&scores)
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
            TreeNode::Leaf { .. } => 1,
        }
    }

    pub(crate) fn validate(&self, n_features: usize, class_count: usize) -> Result<(), MlError> {
        match self {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= n_features {
                    return Err(MlError::SchemaViolation(format!(
                        "split feature {feature} out of range for {n_features} features"
                    )));
                }
                if !threshold.is_finite() {
                    return Err(MlError::SchemaViolation("non-finite threshold".into()));
                }
                left.validate(n_features, class_count)?;
                right.validate(n_features, class_count)
            }
            TreeNode::Leaf { counts } => {
                if counts.len() != class_count {
                    return Err(MlError::SchemaViolation(format!(
                        "leaf has {} counts, expected {class_count}",
                        counts.len()
                    )));
                }
                if counts.iter().sum::<u64>() == 0 {
                    return Err(MlError::SchemaViolation("leaf with zero samples".into()));
                }
                Ok(())
            }
        }
    }
}

impl Classifier for TreeNode {
    fn predict(&self, x: &[f64]) -> Result<Prediction, MlError> {
        let counts = self.leaf(x);
        let total = counts.iter().sum::<u64>() as f64;
        let scores: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
        Ok(Prediction {
            class: argmax_lowest(&scores),
            scores,
        })
    }
}

/// Recursive CART on `rows` (which may repeat, as in a bootstrap sample).
///
/// When the config asks for fewer features than the dataset has, each node
/// visits the features in a fresh random order and keeps the first ones that
/// are not constant within the node; otherwise `rng` is untouched.
pub fn train_tree<R: Rng>(
    dataset: &Dataset,
    config: &TrainConfig,
    rows: &[usize],
    rng: &mut R,
) -> Result<TreeNode, MlError> {
    if rows.is_empty() || dataset.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    config.validate(dataset.n_features())?;
    let per_split = config.features_per_split.resolve(dataset.n_features());
    Ok(grow(dataset, config, per_split, rows.to_vec(), 0, rng))
}

fn grow<R: Rng>(
    dataset: &Dataset,
    config: &TrainConfig,
    per_split: usize,
    rows: Vec<usize>,
    depth: usize,
    rng: &mut R,
) -> TreeNode {
    let counts = dataset.class_counts(&rows);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let leaf = || TreeNode::Leaf {
        counts: counts.to_vec(),
    };
    if pure || depth >= config.max_depth || rows.len() < config.min_samples_split.max(2) {
        return leaf();
    }

    let n_features = dataset.n_features();
    let candidates: Vec<usize> = if per_split < n_features {
        // Features constant within the node do not count towards the quota.
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let mut subset: Vec<usize> = order
            .into_iter()
            .filter(|&f| !is_constant(dataset, &rows, f))
            .take(per_split)
            .collect();
        subset.sort_unstable();
        subset
    } else {
        (0..n_features).collect()
    };

    let Some(split) = best_split(dataset, &rows, &candidates, config.min_impurity_decrease) else {
        return leaf();
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| dataset.value(r, split.feature) <= split.threshold);
    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

    let left = grow(dataset, config, per_split, left_rows, depth + 1, rng);
    let right = grow(dataset, config, per_split, right_rows, depth + 1, rng);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn is_constant(dataset: &Dataset, rows: &[usize], feature: usize) -> bool {
    let first = dataset.value(rows[0], feature);
    rows.iter().all(|&r| dataset.value(r, feature) == first)
}
