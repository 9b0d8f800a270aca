use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_input, check_training_data, proba_from_margin, softplus, sigmoid, Classifier};
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn margin(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_input(x, self.weights.len())?;
        Ok(x.dot(&ArrayView1::from(&self.weights[..])) + self.intercept)
    }
}

impl Classifier for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(proba_from_margin(self.margin(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            c: 0.095,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

/// `0.5 |w|^2 + C * sum_i logloss(w . x_i + b, y_i)` and its gradient.
/// Parameters are packed as `[w..., b]`; the intercept is unpenalized.
pub fn logistic_objective(params: &[f64], x: ArrayView2<'_, f64>, y: &[bool], c: f64) -> Result<(f64, Vec<f64>)> {
    let d = x.ncols();
    ensure_dim(d + 1, params.len())?;
    ensure_dim(x.nrows(), y.len())?;
    let w = ArrayView1::from(&params[..d]);
    let b = params[d];
    let z = x.dot(&w) + b;
    let mut value = 0.5 * w.dot(&w);
    let mut resid = Array1::<f64>::zeros(x.nrows());
    for i in 0..x.nrows() {
        let yi = f64::from(u8::from(y[i]));
        value += c * (softplus(z[i]) - yi * z[i]);
        resid[i] = c * (sigmoid(z[i]) - yi);
    }
    let mut grad = (x.t().dot(&resid) + w).to_vec();
    grad.push(resid.sum());
    Ok((value, grad))
}

pub fn train_logistic(x: ArrayView2<'_, f64>, y: &[bool], config: &LogisticConfig) -> Result<LinearModel> {
    check_training_data(x, y)?;
    if !(config.c > 0.0) || config.max_iter == 0 {
        return Err(Error::InvalidConfig("logistic regression needs C > 0 and max_iter >= 1".into()));
    }
    let n_pos = y.iter().filter(|v| **v).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::InvalidData("logistic regression needs both classes".into()));
    }
    let d = x.ncols();
    let f = |p: &[f64]| logistic_objective(p, x, y, config.c);
    let params = lbfgs(f, vec![0.0; d + 1], config.max_iter, config.tol)?;
    Ok(LinearModel {
        weights: params[..d].to_vec(),
        intercept: params[d],
    })
}

const MEMORY: usize = 10;

/// Limited-memory BFGS with backtracking Armijo line search. Stops when the
/// max-norm of the gradient falls under `tol` or after `max_iter` iterations.
fn lbfgs<F>(f: F, mut p: Vec<f64>, max_iter: usize, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut fx, mut g) = f(&p)?;
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    for _ in 0..max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, yv, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0 / dot(&g, &g).sqrt().max(1.0), |(s, yv, _)| dot(s, yv) / dot(yv, yv));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, yv, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let bta = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - bta) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let (mut p_new, mut f_new, mut g_new);
        loop {
            p_new = p.iter().zip(&dir).map(|(a, b)| a + step * b).collect::<Vec<_>>();
            (f_new, g_new) = f(&p_new)?;
            if f_new <= fx + 1e-4 * step * slope {
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Ok(p);
            }
        }
        let s: Vec<f64> = p_new.iter().zip(&p).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, yv, 1.0 / sy));
        }
        let converged = (fx - f_new).abs() <= f64::EPSILON * fx.abs().max(1.0);
        p = p_new;
        fx = f_new;
        g = g_new;
        if converged {
            break;
        }
    }
    if !fx.is_finite() {
        return Err(Error::Numerical("logistic objective became non-finite".into()));
    }
    Ok(p)
}
