//! Schoenfeld residuals and the proportional-hazards slope test.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::fit::FittedCox;
use super::objective::CoxProblem;
use crate::data::SurvivalDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhTest {
    pub feature: String,
    pub correlation: f64,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchoenfeldResiduals {
    /// Event times in ascending order, one per residual row.
    pub event_times: Vec<f64>,
    /// Raw residuals `x_i - xbar(t_i)`, events by features.
    pub residuals: Array2<f64>,
    /// `beta + n_events * V r_i` with `V` the inverse penalized information.
    /// Falls back to the raw residuals when the information is singular.
    pub scaled: Array2<f64>,
    pub tests: Vec<PhTest>,
}

/// Residuals against the risk-set weighted covariate mean at each event time,
/// with a Pearson slope test of the scaled residuals on event-time rank.
pub fn schoenfeld_residuals(fitted: &FittedCox, dataset: &SurvivalDataset) -> Result<SchoenfeldResiduals> {
    let d = fitted.n_features();
    ensure_dim(d, dataset.features().n_cols())?;
    let n_events = dataset.n_events();
    if n_events < 3 {
        return Err(Error::InvalidData(format!(
            "Schoenfeld test needs at least 3 events, found {n_events}"
        )));
    }
    let problem = CoxProblem::from_dataset(dataset)?;
    let beta = ArrayView1::from(&fitted.beta[..]);
    let (eta, _) = problem.linear_predictor(beta);
    let x = problem.x();
    let order = problem.order();

    let mut s0 = 0.0;
    let mut s1 = Array1::<f64>::zeros(d);
    let mut rows: Vec<(f64, usize, Array1<f64>)> = Vec::with_capacity(n_events);
    let mut shift = f64::NEG_INFINITY;
    for (start, end) in problem.groups_descending() {
        let group_max = order[start..end].iter().map(|&i| eta[i]).fold(f64::NEG_INFINITY, f64::max);
        if group_max > shift {
            let r = (shift - group_max).exp();
            s0 *= r;
            s1 *= r;
            shift = group_max;
        }
        for &i in &order[start..end] {
            let w = (eta[i] - shift).exp();
            s0 += w;
            s1.scaled_add(w, &x.row(i));
        }
        let mean = &s1 / s0;
        for &i in &order[start..end] {
            if problem.events()[i] {
                rows.push((problem.durations()[i], i, &x.row(i) - &mean));
            }
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut residuals = Array2::<f64>::zeros((n_events, d));
    for (k, (_, _, r)) in rows.iter().enumerate() {
        residuals.row_mut(k).assign(r);
    }
    let event_times: Vec<f64> = rows.iter().map(|r| r.0).collect();

    let info = problem.evaluate(beta, fitted.penalizer, fitted.tie_rule)?.hessian;
    let scaled = match linalg::inverse_spd(info.view()) {
        Some(v) => {
            let mut s = residuals.dot(&v) * n_events as f64;
            for mut row in s.rows_mut() {
                row += &beta;
            }
            s
        }
        None => residuals.clone(),
    };

    let ranks = average_ranks(&event_times);
    let df = (n_events - 2) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let tests = (0..d)
        .map(|j| {
            let col = scaled.column(j).to_vec();
            let r = pearson(&col, &ranks);
            let (statistic, p_value) = if r.abs() >= 1.0 {
                (f64::INFINITY.copysign(r), 0.0)
            } else {
                let t = r * (df / (1.0 - r * r)).sqrt();
                (t, 2.0 * t_dist.sf(t.abs()))
            };
            PhTest {
                feature: fitted.feature_names.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
                correlation: r,
                statistic,
                p_value,
            }
        })
        .collect();

    Ok(SchoenfeldResiduals {
        event_times,
        residuals,
        scaled,
        tests,
    })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Zero when either side has no variance.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 1e-300 || sbb <= 1e-300 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}
