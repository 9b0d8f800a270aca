use ndarray::ArrayView1;

use super::{Background, Explanation};
use crate::classifiers::LinearModel;
use crate::error::{ensure_dim, Result};

/// `phi_j = w_j (x_j - mean_j)` on the margin.
pub fn linear_shap(model: &LinearModel, x: ArrayView1<'_, f64>, background: &Background) -> Result<Explanation> {
    ensure_dim(model.weights.len(), x.len())?;
    ensure_dim(model.weights.len(), background.n_features())?;
    let mean = background.mean();
    let values = model.weights.iter().zip(x).zip(&mean).map(|((w, xi), m)| w * (xi - m)).collect();
    let base_value = model.intercept + model.weights.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(Explanation { values, base_value })
}
