use ndarray::{Array1, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classification_tree, FeatureSampler, Tree, TreeConfig};
use super::{check_input, check_training_data, Classifier};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 138,
            max_depth: 33,
            min_samples_split: 6,
            min_samples_leaf: 7,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    /// Seed each member tree was grown with.
    pub tree_seeds: Vec<u64>,
    pub n_features: usize,
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Unweighted mean of member tree probabilities.
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_input(x, self.n_features)?;
        let t = self.trees.len() as f64;
        Ok(x.rows()
            .into_iter()
            .map(|r| self.trees.iter().map(|tr| tr.predict_row(r)).sum::<f64>() / t)
            .collect())
    }
}

pub fn train_forest(x: ArrayView2<'_, f64>, y: &[bool], config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    check_training_data(x, y)?;
    if config.n_estimators == 0 {
        return Err(Error::InvalidConfig("n_estimators must be at least 1".into()));
    }
    let tree_cfg = TreeConfig {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        min_samples_leaf: config.min_samples_leaf,
    };
    tree_cfg.validate()?;
    let (n, p) = x.dim();
    let n_try = match config.max_features {
        MaxFeatures::Sqrt => ((p as f64).sqrt() as usize).max(1),
        MaxFeatures::All => p,
    };
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut tree_seeds = Vec::with_capacity(config.n_estimators);
    for t in 0..config.n_estimators {
        let s = derive_seed(seed, t as u64);
        let mut r = rng(s);
        let rows: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| r.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let sampler = (n_try < p).then_some(FeatureSampler { count: n_try, rng: &mut r });
        trees.push(grow_classification_tree(x, y, rows, &tree_cfg, sampler)?);
        tree_seeds.push(s);
    }
    Ok(ForestModel {
        trees,
        tree_seeds,
        n_features: p,
    })
}
