//! Binary classifiers: logistic regression, CART, random forest, gradient
//! boosted trees and two multilayer perceptron architectures, plus a seeded
//! random-search tuner.
//!
//! Every model exposes class-1 probabilities through [`Classifier`], and
//! [`classify`] thresholds them. Trained models serialize to a versioned
//! JSON document with [`SavedModel`].

mod boosted;
mod forest;
mod linear;
mod mlp;
mod tree;
mod tune;

use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

pub use boosted::{train_gbt, BoostedModel, GbtConfig};
pub use forest::{train_forest, ForestConfig, ForestModel, MaxFeatures};
pub use linear::{logistic_objective, train_logistic, LinearModel, LogisticConfig};
pub use mlp::{train_mlp, Dense, MlpArch, MlpConfig, MlpModel};
pub use tree::{train_tree, Node, Tree, TreeConfig, TreeModel};
pub use tune::{random_search_tune, search_space, Param, ParamRange, Trial, TuneResult};

/// Format version written into saved model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Dt,
    Rf,
    Gbt,
    Mlp,
    ResMlp,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Lr, Family::Dt, Family::Rf, Family::Gbt, Family::Mlp, Family::ResMlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lr => "lr",
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Gbt => "gbt",
            Family::Mlp => "mlp",
            Family::ResMlp => "resmlp",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown classifier family `{s}`")))
    }
}

pub trait Classifier {
    fn n_features(&self) -> usize;

    /// Class-1 probability for each row.
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>>;

    fn predict_proba_row(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let row = x.to_owned().insert_axis(ndarray::Axis(0));
        Ok(self.predict_proba(row.view())?[0])
    }
}

/// Label 1 iff the predicted probability is at least `tau`.
pub fn classify<C: Classifier + ?Sized>(model: &C, x: ArrayView1<'_, f64>, tau: f64) -> Result<u8> {
    Ok(u8::from(model.predict_proba_row(x)? >= tau))
}

/// Converts 0/1 values to booleans, rejecting anything else.
pub fn binary_labels(y: &[f64]) -> Result<Vec<bool>> {
    y.iter()
        .enumerate()
        .map(|(i, &v)| match v {
            v if v == 0.0 => Ok(false),
            v if v == 1.0 => Ok(true),
            v => Err(Error::InvalidData(format!("label {i} is {v}, expected 0 or 1"))),
        })
        .collect()
}

pub(crate) fn check_training_data(x: ArrayView2<'_, f64>, y: &[bool]) -> Result<()> {
    ensure_dim(x.nrows(), y.len())?;
    if x.nrows() == 0 {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if x.ncols() == 0 {
        return Err(Error::Empty("training set has no features".into()));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidData("training features must be finite".into()));
    }
    Ok(())
}

pub(crate) fn check_input(x: ArrayView2<'_, f64>, n_features: usize) -> Result<()> {
    ensure_dim(n_features, x.ncols())?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidData("prediction inputs must be finite".into()));
    }
    Ok(())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Family-specific hyperparameters. Defaults are the tuned presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TrainConfig {
    Lr(LogisticConfig),
    Dt(TreeConfig),
    Rf(ForestConfig),
    Gbt(GbtConfig),
    Mlp(MlpConfig),
    #[serde(rename = "resmlp")]
    ResMlp(MlpConfig),
}

impl TrainConfig {
    pub fn preset(family: Family) -> Self {
        match family {
            Family::Lr => TrainConfig::Lr(LogisticConfig::default()),
            Family::Dt => TrainConfig::Dt(TreeConfig::default()),
            Family::Rf => TrainConfig::Rf(ForestConfig::default()),
            Family::Gbt => TrainConfig::Gbt(GbtConfig::default()),
            Family::Mlp => TrainConfig::Mlp(MlpConfig::plain()),
            Family::ResMlp => TrainConfig::ResMlp(MlpConfig::residual()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            TrainConfig::Lr(_) => Family::Lr,
            TrainConfig::Dt(_) => Family::Dt,
            TrainConfig::Rf(_) => Family::Rf,
            TrainConfig::Gbt(_) => Family::Gbt,
            TrainConfig::Mlp(_) => Family::Mlp,
            TrainConfig::ResMlp(_) => Family::ResMlp,
        }
    }
}

/// Trains the model described by `config`.
pub fn train(config: &TrainConfig, x: ArrayView2<'_, f64>, y: &[bool], seed: u64) -> Result<Model> {
    Ok(match config {
        TrainConfig::Lr(c) => Model::Logistic(train_logistic(x, y, c)?),
        TrainConfig::Dt(c) => Model::Tree(train_tree(x, y, c)?),
        TrainConfig::Rf(c) => Model::Forest(train_forest(x, y, c, seed)?),
        TrainConfig::Gbt(c) => Model::Boosted(train_gbt(x, y, c, seed)?),
        TrainConfig::Mlp(c) | TrainConfig::ResMlp(c) => Model::Mlp(train_mlp(x, y, c, seed)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Logistic(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Boosted(BoostedModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::Logistic(_) => Family::Lr,
            Model::Tree(_) => Family::Dt,
            Model::Forest(_) => Family::Rf,
            Model::Boosted(_) => Family::Gbt,
            Model::Mlp(m) => match m.arch {
                MlpArch::Plain { .. } => Family::Mlp,
                MlpArch::Residual { .. } => Family::ResMlp,
            },
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Logistic(m) => m,
            Model::Tree(m) => m,
            Model::Forest(m) => m,
            Model::Boosted(m) => m,
            Model::Mlp(m) => m,
        }
    }

    /// Log-odds for margin models (logistic, boosted, MLP); `None` for
    /// trees and forests, whose natural output is a probability.
    pub fn predict_margin(&self, x: ArrayView2<'_, f64>) -> Option<Result<Array1<f64>>> {
        match self {
            Model::Logistic(m) => Some(m.margin(x)),
            Model::Boosted(m) => Some(m.margin(x)),
            Model::Mlp(m) => Some(m.margin(x)),
            Model::Tree(_) | Model::Forest(_) => None,
        }
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.inner().predict_proba(x)
    }
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub family: Family,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub model: Model,
}

impl SavedModel {
    pub fn new(config: TrainConfig, feature_names: Vec<String>, model: Model) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            family: model.family(),
            config,
            feature_names,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(s)?;
        if saved.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported model format version {}",
                saved.format_version
            )));
        }
        Ok(saved)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn proba_from_margin(margin: Array1<f64>) -> Array1<f64> {
    margin.mapv(sigmoid)
}
