use nalgebra::SymmetricEigen;
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::fit::FittedCox;
use super::objective::CoxProblem;
use crate::data::SurvivalDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxCoefficient {
    pub feature: String,
    pub beta: f64,
    pub se: f64,
    pub hazard_ratio: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub z: f64,
    pub p_value: f64,
}

impl CoxCoefficient {
    pub fn from_estimate(feature: impl Into<String>, beta: f64, se: f64) -> Self {
        let z = beta / se;
        Self {
            feature: feature.into(),
            beta,
            se,
            hazard_ratio: beta.exp(),
            ci_lower: (beta - Z_95 * se).exp(),
            ci_upper: (beta + Z_95 * se).exp(),
            z,
            p_value: erfc(z.abs() / std::f64::consts::SQRT_2),
        }
    }
}

/// Hazard ratios with 95% Wald intervals and two-sided p-values, using
/// standard errors from the inverse penalized observed information.
pub fn cox_summary(fitted: &FittedCox, dataset: &SurvivalDataset) -> Result<Vec<CoxCoefficient>> {
    ensure_dim(fitted.n_features(), dataset.features().n_cols())?;
    let problem = CoxProblem::from_dataset(dataset)?;
    let info = problem
        .evaluate(ArrayView1::from(&fitted.beta[..]), fitted.penalizer, fitted.tie_rule)?
        .hessian;
    let collinear = collinear_columns(&info, &fitted.feature_names);
    if !collinear.is_empty() {
        return Err(Error::Collinear(collinear));
    }
    let cov = linalg::inverse_spd(info.view())
        .ok_or_else(|| Error::Collinear(fitted.feature_names.clone()))?;
    Ok(fitted
        .beta
        .iter()
        .enumerate()
        .map(|(j, &b)| CoxCoefficient::from_estimate(fitted.feature_names[j].clone(), b, cov[[j, j]].sqrt()))
        .collect())
}

/// Greedily adds columns and reports those that make the leading block of
/// the information matrix numerically singular.
fn collinear_columns(info: &ndarray::Array2<f64>, names: &[String]) -> Vec<String> {
    let d = info.nrows();
    let scale = (0..d).map(|j| info[[j, j]].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut kept: Vec<usize> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..d {
        let mut cand = kept.clone();
        cand.push(j);
        let sub = nalgebra::DMatrix::from_fn(cand.len(), cand.len(), |a, b| info[[cand[a], cand[b]]]);
        let min_eig = SymmetricEigen::new(sub).eigenvalues.min();
        if min_eig <= 1e-10 * scale {
            bad.push(names.get(j).cloned().unwrap_or_else(|| format!("x{j}")));
        } else {
            kept.push(j);
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;
    use crate::survival::{fit_cox, CoxOptions};
    use ndarray::array;

    #[test]
    fn zero_beta_straddles_one() {
        let c = CoxCoefficient::from_estimate("x", 0.0, 0.3);
        assert_eq!(c.hazard_ratio, 1.0);
        assert!(c.ci_lower < 1.0 && c.ci_upper > 1.0);
        assert_eq!(c.p_value, 1.0);
    }

    #[test]
    fn ln2_interval_arithmetic() {
        let c = CoxCoefficient::from_estimate("x", std::f64::consts::LN_2, 0.1);
        assert!((c.hazard_ratio - 2.0).abs() < 1e-15);
        assert!((c.ci_lower - (0.693_147_180_56f64 - 0.196).exp()).abs() < 1e-4);
        assert!((c.ci_upper - (0.693_147_180_56f64 + 0.196).exp()).abs() < 1e-4);
    }

    #[test]
    fn duplicated_column_is_reported() {
        let x = array![[0.5, 0.5], [-0.3, -0.3], [1.2, 1.2], [0.1, 0.1], [-1.0, -1.0], [0.7, 0.7]];
        let ds = SurvivalDataset::new(
            vec![3.0, 5.0, 1.0, 4.0, 9.0, 2.0],
            vec![true, false, true, true, true, true],
            FeatureMatrix::from_array(vec!["a".into(), "a_copy".into()], x).unwrap(),
        )
        .unwrap();
        // the ridge keeps the fit finite; the unpenalized information is singular
        let fit = fit_cox(&ds, &CoxOptions { penalizer: 1e-3, ..Default::default() }).unwrap();
        let unpenalized = FittedCox { penalizer: 0.0, ..fit };
        match cox_summary(&unpenalized, &ds) {
            Err(Error::Collinear(cols)) => assert_eq!(cols, vec!["a_copy".to_string()]),
            other => panic!("{other:?}"),
        }
    }
}
