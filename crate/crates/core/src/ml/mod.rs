//! CART decision trees and random forests.
//!
//! Splits are axis-aligned, `feature <= threshold` goes left, thresholds sit at
//! midpoints between consecutive distinct values and the criterion is Gini
//! impurity. Split selection compares candidates exactly in integer
//! arithmetic so ties are resolved by rule, never by rounding noise.

mod forest;
mod model;
mod split;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::train_forest;
pub use model::{deserialize_model, serialize_model, ForestModel, Model, TreeModel, MODEL_FORMAT};
pub use split::{best_split, gini, Split};
pub use tree::{train_tree, TreeNode};

pub use crate::waveform::CLASS_COUNT;

/// Upper bound on `max_depth`, keeping serialized trees within JSON nesting limits.
pub const MAX_TREE_DEPTH: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("node has no samples")]
    EmptyNode,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("feature vector has {got} values, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file violates schema: {0}")]
    SchemaViolation(String),
    #[error("unknown model format {0:?}")]
    UnknownVersion(String),
}

/// Row-major feature matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, feature_names: Vec<String>) -> Result<Self, MlError> {
        if features.is_empty() {
            return Err(MlError::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(MlError::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let width = feature_names.len();
        if width == 0 {
            return Err(MlError::InvalidDataset("no features".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != width {
                return Err(MlError::InvalidDataset(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MlError::InvalidDataset(format!("row {i} has a non-finite value")));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= CLASS_COUNT) {
            return Err(MlError::InvalidDataset(format!("label {bad} is not a class id")));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row][feature]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// New dataset holding the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self, MlError> {
        Self::new(
            rows.iter().map(|&i| self.features[i].clone()).collect(),
            rows.iter().map(|&i| self.labels[i]).collect(),
            self.feature_names.clone(),
        )
    }

    pub(crate) fn class_counts(&self, rows: &[usize]) -> [u64; CLASS_COUNT] {
        let mut counts = [0u64; CLASS_COUNT];
        for &r in rows {
            counts[self.labels[r]] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeaturesPerSplit {
    /// `floor(sqrt(F))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            FeaturesPerSplit::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::All => n_features,
            FeaturesPerSplit::Count(k) => k,
        }
    }
}

impl std::str::FromStr for FeaturesPerSplit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sqrt" => Ok(Self::Sqrt),
            "all" => Ok(Self::All),
            other => other
                .parse::<usize>()
                .map(Self::Count)
                .map_err(|_| format!("expected \"sqrt\", \"all\" or a positive integer, got {other:?}")),
        }
    }
}

impl Serialize for FeaturesPerSplit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FeaturesPerSplit::Sqrt => s.serialize_str("sqrt"),
            FeaturesPerSplit::All => s.serialize_str("all"),
            FeaturesPerSplit::Count(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for FeaturesPerSplit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Named(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(k) => Ok(FeaturesPerSplit::Count(k)),
            Repr::Named(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_impurity_decrease: f64,
    pub n_trees: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl TrainConfig {
    /// Single decision tree: every feature considered at every node, no bootstrap.
    pub fn tree() -> Self {
        Self {
            max_depth: 12,
            min_samples_split: 2,
            min_impurity_decrease: 0.0,
            n_trees: 1,
            features_per_split: FeaturesPerSplit::All,
            bootstrap: false,
            seed: 0,
        }
    }

    pub fn forest() -> Self {
        Self {
            n_trees: 100,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            ..Self::tree()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self, n_features: usize) -> Result<(), MlError> {
        let bad = |msg: String| Err(MlError::InvalidConfig(msg));
        if !(1..=MAX_TREE_DEPTH).contains(&self.max_depth) {
            return bad(format!(
                "max_depth must be in 1..={MAX_TREE_DEPTH}, got {}",
                self.max_depth
            ));
        }
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1".into());
        }
        if !(self.min_impurity_decrease >= 0.0 && self.min_impurity_decrease.is_finite()) {
            return bad(format!(
                "min_impurity_decrease must be >= 0, got {}",
                self.min_impurity_decrease
            ));
        }
        let k = self.features_per_split.resolve(n_features);
        if k == 0 || k > n_features {
            return bad(format!(
                "features_per_split resolves to {k}, must be in 1..={n_features}"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Forest,
}

impl ModelKind {
    /// Short label used in reports: `DT` or `RF`.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Tree => "DT",
            ModelKind::Forest => "RF",
        }
    }

    pub fn default_config(self) -> TrainConfig {
        match self {
            ModelKind::Tree => TrainConfig::tree(),
            ModelKind::Forest => TrainConfig::forest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub scores: Vec<f64>,
}

pub trait Classifier {
    fn predict(&self, features: &[f64]) -> Result<Prediction, MlError>;
}

/// Trains a tree or forest, according to `kind`.
pub fn train(dataset: &Dataset, kind: ModelKind, config: &TrainConfig) -> Result<Model, MlError> {
    Ok(match kind {
        ModelKind::Tree => {
            config.validate(dataset.n_features())?;
            let rows: Vec<usize> = (0..dataset.len()).collect();
            let mut rng = crate::seed::rng_from_seed(config.seed);
            let root = train_tree(dataset, config, &rows, &mut rng)?;
            Model::Tree(TreeModel::new(root, *config, dataset.feature_names().to_vec()))
        }
        ModelKind::Forest => Model::Forest(train_forest(dataset, config)?),
    })
}

/// Index of the largest score; the lowest index wins ties.
pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn dataset_validation() {
        assert_eq!(Dataset::new(vec![], vec![], names(1)), Err(MlError::EmptyDataset));
        assert!(Dataset::new(vec![vec![1.0]], vec![8], names(1)).is_err());
        assert!(Dataset::new(vec![vec![1.0, 2.0]], vec![0], names(1)).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], vec![0], names(1)).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![0, 1], names(1)).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![7], names(1)).is_ok());
    }

    #[test]
    fn features_per_split_resolution_and_serde() {
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(12), 3);
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(1), 1);
        assert_eq!(FeaturesPerSplit::All.resolve(12), 12);
        for v in [
            FeaturesPerSplit::Sqrt,
            FeaturesPerSplit::All,
            FeaturesPerSplit::Count(4),
        ] {
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<FeaturesPerSplit>(&json).unwrap(), v);
        }
        assert_eq!(serde_json::to_string(&FeaturesPerSplit::Sqrt).unwrap(), "\"sqrt\"");
        assert!(serde_json::from_str::<FeaturesPerSplit>("\"log2\"").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::forest().validate(12).is_ok());
        assert!(TrainConfig {
            max_depth: 0,
            ..TrainConfig::tree()
        }
        .validate(3)
        .is_err());
        assert!(TrainConfig {
            n_trees: 0,
            ..TrainConfig::forest()
        }
        .validate(3)
        .is_err());
        let too_many = TrainConfig {
            features_per_split: FeaturesPerSplit::Count(4),
            ..TrainConfig::tree()
        };
        assert!(too_many.validate(3).is_err());
        let zero = TrainConfig {
            features_per_split: FeaturesPerSplit::Count(0),
            ..TrainConfig::tree()
        };
        assert!(zero.validate(3).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_on_tie() {
        assert_eq!(argmax_lowest(&[0.0, 0.5, 0.5]), 1);
        assert_eq!(argmax_lowest(&[0.0; 4]), 0);
    }
}
