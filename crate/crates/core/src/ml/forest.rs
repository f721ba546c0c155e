use rand::Rng;
use rayon::prelude::*;

use super::{train_tree, Dataset, ForestModel, MlError, TrainConfig, TreeNode};
use crate::seed::{derive_seed, rng_from_seed};

/// Seed of tree `t`: `derive_seed(config.seed, [t])`.
pub fn tree_seed(forest_seed: u64, tree: usize) -> u64 {
    derive_seed(forest_seed, &[tree as u64])
}

fn train_member(dataset: &Dataset, config: &TrainConfig, t: usize) -> Result<TreeNode, MlError> {
    let mut rng = rng_from_seed(tree_seed(config.seed, t));
    let n = dataset.len();
    let rows: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    train_tree(dataset, config, &rows, &mut rng)
}

/// Bagged CART ensemble. Trees are built in parallel; each owns a random
/// stream derived from its index, so the result does not depend on scheduling.
pub fn train_forest(dataset: &Dataset, config: &TrainConfig) -> Result<ForestModel, MlError> {
    if dataset.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    config.validate(dataset.n_features())?;
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| train_member(dataset, config, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel::new(trees, *config, dataset.feature_names().to_vec()))
}
