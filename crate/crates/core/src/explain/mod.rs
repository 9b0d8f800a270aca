//! Shapley attributions under the interventional value function
//! `v(A) = mean_b f(x_A, b_{-A})` over a background sample.
//!
//! [`exact_shapley`] enumerates every coalition and serves as the oracle
//! for [`linear_shap`], [`tree_shap`] and [`kernel_shap`].

mod exact;
mod kernel;
mod linear;
mod tree;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::classifiers::Model;
use crate::error::{ensure_dim, Error, Result};
use crate::rng::{derive_seed, rng};

pub use exact::{exact_shapley, MAX_EXACT_FEATURES};
pub use kernel::kernel_shap;
pub use linear::linear_shap;
pub use tree::{tree_shap, TreeEnsemble};

/// Reference rows for the value function.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    rows: Array2<f64>,
}

impl Background {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Empty("background needs at least one row".into()));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData("background rows must be finite".into()));
        }
        Ok(Self { rows })
    }

    /// `k` rows drawn without replacement, kept in their original order.
    /// Takes every row when `k >= n`.
    pub fn sample(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Self> {
        let n = x.nrows();
        if k >= n {
            return Self::new(x.to_owned());
        }
        let mut idx = sample(&mut rng(seed), n, k.max(1)).into_vec();
        idx.sort_unstable();
        Self::new(x.select(ndarray::Axis(0), &idx))
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn mean(&self) -> Array1<f64> {
        self.rows.mean_axis(ndarray::Axis(0)).expect("non-empty")
    }
}

/// Attributions for one explained row.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub values: Vec<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
}

impl Explanation {
    /// `base_value + sum(values)`, which equals `f(x)` by efficiency.
    pub fn output(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }
}

/// Evaluates `v(c)` for coalitions `c = 0..n_coalitions`, where
/// `member(c, j)` says whether feature `j` comes from `x`, batching rows
/// through `model_fn`.
pub(crate) fn coalition_values<F, M>(
    model_fn: &F,
    x: ArrayView1<'_, f64>,
    background: &Background,
    n_coalitions: usize,
    member: M,
) -> Result<Vec<f64>>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Array1<f64>>,
    M: Fn(usize, usize) -> bool,
{
    const MAX_ROWS: usize = 1 << 15;
    let (k, d) = (background.len(), x.len());
    ensure_dim(background.n_features(), d)?;
    let per_chunk = (MAX_ROWS / k).max(1);
    let mut out = Vec::with_capacity(n_coalitions);
    let mut start = 0;
    while start < n_coalitions {
        let end = (start + per_chunk).min(n_coalitions);
        let mut batch = Array2::<f64>::zeros(((end - start) * k, d));
        for c in start..end {
            for (b, bg) in background.rows().rows().into_iter().enumerate() {
                let mut row = batch.row_mut((c - start) * k + b);
                for j in 0..d {
                    row[j] = if member(c, j) { x[j] } else { bg[j] };
                }
            }
        }
        let y = model_fn(batch.view())?;
        ensure_dim((end - start) * k, y.len())?;
        for c in 0..end - start {
            out.push(y.slice(ndarray::s![c * k..(c + 1) * k]).mean().expect("k >= 1"));
        }
        start = end;
    }
    Ok(out)
}

/// Per-sample, per-feature attributions with a shared base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub values: Array2<f64>,
    pub base_value: f64,
    pub feature_names: Vec<String>,
}

impl AttributionMatrix {
    pub fn from_explanations(feature_names: Vec<String>, explanations: &[Explanation]) -> Result<Self> {
        let d = feature_names.len();
        let mut values = Array2::<f64>::zeros((explanations.len(), d));
        for (i, e) in explanations.iter().enumerate() {
            ensure_dim(d, e.values.len())?;
            values.row_mut(i).assign(&ArrayView1::from(&e.values[..]));
        }
        let base_value = explanations.first().map_or(0.0, |e| e.base_value);
        Ok(Self {
            values,
            base_value,
            feature_names,
        })
    }

    /// Rows are samples; columns are features followed by `__base_value__`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("__base_value__");
        w.write_record(&header)?;
        let base = self.base_value.to_string();
        for row in self.values.rows() {
            let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
            rec.push(base.clone());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<attribution csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mean_abs: f64,
}

/// Features by descending mean |attribution|, ties broken by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.feature.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rank", "feature", "mean_abs_shap"])?;
        for (i, e) in self.entries.iter().enumerate() {
            w.write_record([(i + 1).to_string(), e.feature.clone(), e.mean_abs.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<ranking csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            feature: String,
            mean_abs_shap: f64,
        }
        let mut entries = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            entries.push(RankedFeature {
                feature: row.feature,
                mean_abs: row.mean_abs_shap,
            });
        }
        Ok(Self::sorted(entries))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_csv(std::fs::File::open(path).map_err(|e| Error::io(path, e))?)
    }

    fn sorted(mut entries: Vec<RankedFeature>) -> Self {
        entries.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs).then_with(|| a.feature.cmp(&b.feature)));
        Self { entries }
    }
}

pub fn mean_abs_ranking(attributions: &AttributionMatrix) -> Result<FeatureRanking> {
    let m = attributions.values.nrows();
    if m == 0 {
        return Err(Error::Empty("attribution matrix has no rows".into()));
    }
    let entries = attributions
        .feature_names
        .iter()
        .zip(attributions.values.columns())
        .map(|(name, col)| RankedFeature {
            feature: name.clone(),
            mean_abs: col.iter().map(|v| v.abs()).sum::<f64>() / m as f64,
        })
        .collect();
    Ok(FeatureRanking::sorted(entries))
}

/// Sample sizes and budgets for attribution inside the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerBudget {
    /// Background rows drawn from the training fold.
    pub background: usize,
    /// Training-fold rows explained and averaged for the ranking.
    pub explain_rows: usize,
    /// Coalitions per row for the kernel explainer.
    pub kernel_coalitions: usize,
    /// Background rows used by the kernel explainer.
    pub kernel_background: usize,
}

impl Default for ExplainerBudget {
    fn default() -> Self {
        Self {
            background: 100,
            explain_rows: 200,
            kernel_coalitions: 512,
            kernel_background: 10,
        }
    }
}

/// Explains each row of `x` with the explainer matched to the model:
/// linear (margin) for logistic regression, tree for trees and forests
/// (probability) and boosted trees (margin), kernel for networks (margin).
pub fn explain_model(
    model: &Model,
    x: ArrayView2<'_, f64>,
    background: &Background,
    feature_names: Vec<String>,
    budget: &ExplainerBudget,
    seed: u64,
) -> Result<AttributionMatrix> {
    let explanations = match model {
        Model::Logistic(m) => x.rows().into_iter().map(|r| linear_shap(m, r, background)).collect::<Result<Vec<_>>>()?,
        Model::Tree(m) => x.rows().into_iter().map(|r| tree_shap(m, r, background)).collect::<Result<Vec<_>>>()?,
        Model::Forest(m) => x.rows().into_iter().map(|r| tree_shap(m, r, background)).collect::<Result<Vec<_>>>()?,
        Model::Boosted(m) => x.rows().into_iter().map(|r| tree_shap(m, r, background)).collect::<Result<Vec<_>>>()?,
        Model::Mlp(m) => {
            let bg = Background::sample(background.rows(), budget.kernel_background, derive_seed(seed, u64::MAX))?;
            let f = |rows: ArrayView2<'_, f64>| m.margin(rows);
            x.rows()
                .into_iter()
                .enumerate()
                .map(|(i, r)| kernel_shap(&f, r, &bg, budget.kernel_coalitions, derive_seed(seed, i as u64)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    AttributionMatrix::from_explanations(feature_names, &explanations)
}
