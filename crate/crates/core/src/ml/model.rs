//! Trained model types and their JSON file format.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{argmax_lowest, Classifier, MlError, ModelKind, Prediction, TrainConfig, TreeNode, CLASS_COUNT};

pub const MODEL_FORMAT: &str = "breathsim-model-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub root: TreeNode,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub class_count: usize,
}

impl TreeModel {
    pub fn new(root: TreeNode, config: TrainConfig, feature_names: Vec<String>) -> Self {
        Self {
            root,
            config,
            feature_names,
            class_count: CLASS_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub class_count: usize,
}

impl ForestModel {
    pub fn new(trees: Vec<TreeNode>, config: TrainConfig, feature_names: Vec<String>) -> Self {
        Self {
            trees,
            config,
            feature_names,
            class_count: CLASS_COUNT,
        }
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<(), MlError> {
    if x.len() != expected {
        return Err(MlError::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

impl Classifier for TreeModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction, MlError> {
        check_dim(self.feature_names.len(), x)?;
        self.root.predict(x)
    }
}

impl Classifier for ForestModel {
    /// Each tree votes for its leaf's majority class; scores are vote fractions.
    fn predict(&self, x: &[f64]) -> Result<Prediction, MlError> {
        check_dim(self.feature_names.len(), x)?;
        let mut votes = vec![0u64; self.class_count];
        for tree in &self.trees {
            votes[tree.vote(x)] += 1;
        }
        let total = self.trees.len() as f64;
        let scores: Vec<f64> = votes.iter().map(|&v| v as f64 / total).collect();
        Ok(Prediction {
            class: argmax_lowest(&scores),
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Tree(_) => ModelKind::Tree,
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Tree(m) => &m.feature_names,
            Model::Forest(m) => &m.feature_names,
        }
    }
}

impl Classifier for Model {
    fn predict(&self, x: &[f64]) -> Result<Prediction, MlError> {
        match self {
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    kind: ModelKind,
    config: TrainConfig,
    feature_names: Vec<String>,
    class_count: usize,
    trees: Vec<TreeNode>,
}

pub fn serialize_model(model: &Model) -> String {
    let file = match model {
        Model::Tree(m) => ModelFile {
            format: MODEL_FORMAT.into(),
            kind: ModelKind::Tree,
            config: m.config,
            feature_names: m.feature_names.clone(),
            class_count: m.class_count,
            trees: vec![m.root.clone()],
        },
        Model::Forest(m) => ModelFile {
            format: MODEL_FORMAT.into(),
            kind: ModelKind::Forest,
            config: m.config,
            feature_names: m.feature_names.clone(),
            class_count: m.class_count,
            trees: m.trees.clone(),
        },
    };
    serde_json::to_string(&file).expect("model serialization is infallible")
}

/// Parses and validates a model file.
pub fn deserialize_model(text: &str) -> Result<Model, MlError> {
    let value: Value = serde_json::from_str(text).map_err(|e| MlError::SchemaViolation(e.to_string()))?;
    match value.get("format") {
        Some(Value::String(f)) if f == MODEL_FORMAT => {}
        Some(Value::String(f)) => return Err(MlError::UnknownVersion(f.clone())),
        Some(_) => return Err(MlError::SchemaViolation("format must be a string".into())),
        None => return Err(MlError::SchemaViolation("missing format field".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| MlError::SchemaViolation(e.to_string()))?;

    let n_features = file.feature_names.len();
    if n_features == 0 {
        return Err(MlError::SchemaViolation("no feature names".into()));
    }
    if file.class_count != CLASS_COUNT {
        return Err(MlError::SchemaViolation(format!(
            "class_count must be {CLASS_COUNT}, got {}",
            file.class_count
        )));
    }
    file.config
        .validate(n_features)
        .map_err(|e| MlError::SchemaViolation(e.to_string()))?;
    for tree in &file.trees {
        tree.validate(n_features, file.class_count)?;
    }

    match file.kind {
        ModelKind::Tree => {
            let [root]: [TreeNode; 1] = file
                .trees
                .try_into()
                .map_err(|t: Vec<TreeNode>| MlError::SchemaViolation(format!("tree model has {} trees", t.len())))?;
            Ok(Model::Tree(TreeModel {
                root,
                config: file.config,
                feature_names: file.feature_names,
                class_count: file.class_count,
            }))
        }
        ModelKind::Forest => {
            if file.trees.len() != file.config.n_trees {
                return Err(MlError::SchemaViolation(format!(
                    "forest has {} trees, config says {}",
                    file.trees.len(),
                    file.config.n_trees
                )));
            }
            Ok(Model::Forest(ForestModel {
                trees: file.trees,
                config: file.config,
                feature_names: file.feature_names,
                class_count: file.class_count,
            }))
        }
    }
}
