use ndarray::{ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{train, Classifier, Family, TrainConfig};
use crate::data::{split_folds, train_indices};
use crate::error::{Error, Result};
use crate::metrics::auroc;
use crate::rng::{derive_seed, rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamRange {
    Int { lo: i64, hi: i64 },
    Float { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: &'static str,
    pub range: ParamRange,
}

const fn int(name: &'static str, lo: i64, hi: i64) -> Param {
    Param {
        name,
        range: ParamRange::Int { lo, hi },
    }
}

const fn float(name: &'static str, lo: f64, hi: f64) -> Param {
    Param {
        name,
        range: ParamRange::Float { lo, hi },
    }
}

/// Inclusive search ranges per family. Networks have none.
pub fn search_space(family: Family) -> Vec<Param> {
    match family {
        Family::Lr => vec![float("c", 0.01, 1.0)],
        Family::Dt => vec![
            int("max_depth", 1, 50),
            int("min_samples_split", 2, 20),
            int("min_samples_leaf", 1, 20),
        ],
        Family::Rf => vec![
            int("max_depth", 2, 50),
            int("min_samples_split", 2, 20),
            int("min_samples_leaf", 1, 20),
            int("n_estimators", 50, 200),
        ],
        Family::Gbt => vec![
            int("max_depth", 5, 20),
            int("n_estimators", 50, 150),
            int("min_child_weight", 1, 10),
            float("gamma", 0.5, 3.0),
            float("subsample", 0.6, 1.0),
            float("colsample_bytree", 0.6, 1.0),
            float("colsample_bylevel", 0.01, 0.6),
            float("learning_rate", 0.01, 0.3),
        ],
        Family::Mlp | Family::ResMlp => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TrainConfig,
    pub mean_auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: TrainConfig,
    pub best_auroc: f64,
    pub trials: Vec<Trial>,
}

fn sample_config(family: Family, space: &[Param], r: &mut crate::rng::Rng) -> Result<TrainConfig> {
    let mut value = serde_json::to_value(TrainConfig::preset(family))?;
    let obj = value.as_object_mut().expect("config serializes to an object");
    for p in space {
        let v = match p.range {
            ParamRange::Int { lo, hi } => Value::from(r.random_range(lo..=hi)),
            ParamRange::Float { lo, hi } => Value::from(r.random_range(lo..=hi)),
        };
        obj.insert(p.name.to_string(), v);
    }
    Ok(serde_json::from_value(value)?)
}

/// Samples `budget` configurations uniformly from the family's ranges and
/// keeps the one with the highest mean validation AUROC over `k` folds.
/// The first of equally scoring configurations wins.
pub fn random_search_tune(
    family: Family,
    x: ArrayView2<'_, f64>,
    y: &[bool],
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<TuneResult> {
    let space = search_space(family);
    if space.is_empty() {
        return Err(Error::InvalidConfig(format!("family `{family}` has no search space")));
    }
    if budget == 0 {
        return Err(Error::InvalidConfig("tuning budget must be at least 1".into()));
    }
    crate::error::ensure_dim(x.nrows(), y.len())?;
    let folds = split_folds(x.nrows(), k, derive_seed(seed, stream::FOLDS))?;
    let mut r = rng(derive_seed(seed, stream::CLASSIFIER));
    let mut trials = Vec::with_capacity(budget);
    for t in 0..budget {
        let config = sample_config(family, &space, &mut r)?;
        let mut total = 0.0;
        for (f, val) in folds.iter().enumerate() {
            let tr = train_indices(&folds, f);
            let y_tr: Vec<bool> = tr.iter().map(|&i| y[i]).collect();
            let y_val: Vec<bool> = val.iter().map(|&i| y[i]).collect();
            let model = train(&config, x.select(Axis(0), &tr).view(), &y_tr, derive_seed(seed, (t * k + f) as u64))?;
            let p = model.predict_proba(x.select(Axis(0), val).view())?;
            total += auroc(p.as_slice().expect("contiguous"), &y_val)?;
        }
        trials.push(Trial {
            config,
            mean_auroc: total / k as f64,
        });
    }
    let best = trials
        .iter()
        .fold(None::<&Trial>, |b, t| match b {
            Some(b) if b.mean_auroc >= t.mean_auroc => Some(b),
            _ => Some(t),
        })
        .expect("budget >= 1");
    Ok(TuneResult {
        best: best.config.clone(),
        best_auroc: best.mean_auroc,
        trials,
    })
}
