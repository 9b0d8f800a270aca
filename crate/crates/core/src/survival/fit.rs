use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::objective::{CoxProblem, TieRule};
use crate::data::SurvivalDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg;

/// Shipped ridge penalty.
pub const DEFAULT_PENALIZER: f64 = 0.0007;

/// Five years in days.
pub const FIVE_YEARS_DAYS: f64 = 1826.25;

/// A one-SD covariate shift multiplying the hazard by more than `e^25` is
/// treated as divergence toward a separating direction.
const DIVERGENCE_BOUND: f64 = 25.0;

const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxOptions {
    pub penalizer: f64,
    pub tie_rule: TieRule,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            penalizer: DEFAULT_PENALIZER,
            tie_rule: TieRule::Efron,
            tol: 1e-7,
            max_iter: 100,
        }
    }
}

impl CoxOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalizer >= 0.0 && self.penalizer.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "penalizer must be a non-negative number, got {}",
                self.penalizer
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Right-continuous step function `t -> H0(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCox {
    pub beta: Vec<f64>,
    pub feature_names: Vec<String>,
    pub penalizer: f64,
    pub tie_rule: TieRule,
    pub baseline: BaselineHazard,
    pub convergence: Convergence,
}

impl FittedCox {
    pub fn n_features(&self) -> usize {
        self.beta.len()
    }

    pub fn linear_predictor(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        ensure_dim(self.beta.len(), x.len())?;
        Ok(x.iter().zip(&self.beta).map(|(a, b)| a * b).sum())
    }

    /// `S(t | x) = exp(-H0(t) * exp(beta . x))`.
    pub fn predict_survival(&self, x: ArrayView1<'_, f64>, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidData(format!("time must be non-negative, got {t}")));
        }
        let eta = self.linear_predictor(x)?;
        let h0 = self.baseline.at(t);
        if h0 == 0.0 {
            return Ok(1.0);
        }
        Ok((-h0 * eta.exp()).exp())
    }

    pub fn five_year_risk(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(1.0 - self.predict_survival(x, FIVE_YEARS_DAYS)?)
    }

    /// `beta . x_i` for every row.
    pub fn prognostic_index(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        ensure_dim(self.beta.len(), x.ncols())?;
        Ok(x.dot(&ArrayView1::from(&self.beta[..])))
    }
}

/// Newton-Raphson with step halving on the penalized negative log partial
/// likelihood, followed by the Breslow baseline.
pub fn fit_cox(dataset: &SurvivalDataset, options: &CoxOptions) -> Result<FittedCox> {
    options.validate()?;
    let problem = CoxProblem::from_dataset(dataset)?;
    let d = problem.n_features();
    if d == 0 {
        return Err(Error::InvalidConfig("Cox model needs at least one covariate".into()));
    }
    let scales = column_sds(problem.x());

    let mut beta = Array1::<f64>::zeros(d);
    let mut eval = problem.evaluate(beta.view(), options.penalizer, options.tie_rule)?;
    let mut iterations = 0;
    loop {
        check_divergence(&beta, &scales)?;
        let grad_norm = norm(&eval.gradient);
        if grad_norm <= options.tol {
            break;
        }
        if iterations >= options.max_iter {
            return Err(Error::NotConverged {
                iterations,
                grad_norm,
                beta: beta.to_vec(),
            });
        }
        let step = linalg::solve_spd(eval.hessian.view(), eval.gradient.view())
            .or_else(|| linalg::solve_lu(eval.hessian.view(), eval.gradient.view()))
            .ok_or_else(|| {
                if options.penalizer == 0.0 {
                    Error::Divergence("Hessian became singular".into())
                } else {
                    Error::Singular("Cox Hessian".into())
                }
            })?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta - &(scale * &step);
            if let Ok(next) = problem.evaluate(candidate.view(), options.penalizer, options.tie_rule) {
                if next.value <= eval.value + 1e-12 * eval.value.abs().max(1.0) {
                    accepted = Some((candidate, next));
                    break;
                }
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((b, e)) => {
                let stalled = (&b - &beta).iter().all(|v| v.abs() <= 1e-15 * (1.0 + v.abs()));
                beta = b;
                eval = e;
                if stalled && norm(&eval.gradient) > options.tol {
                    return Err(Error::NotConverged {
                        iterations,
                        grad_norm: norm(&eval.gradient),
                        beta: beta.to_vec(),
                    });
                }
            }
            None => {
                return Err(Error::NotConverged {
                    iterations,
                    grad_norm: norm(&eval.gradient),
                    beta: beta.to_vec(),
                })
            }
        }
    }

    // Without a penalty a convex objective that still decreases past the
    // stationary point along beta has no finite minimizer (monotone likelihood).
    if options.penalizer == 0.0 && beta.iter().any(|b| *b != 0.0) {
        let doubled = 2.0 * &beta;
        if let Ok(far) = problem.evaluate(doubled.view(), 0.0, options.tie_rule) {
            if far.value < eval.value - 1e-12 * eval.value.abs() {
                return Err(Error::Divergence(format!(
                    "objective keeps decreasing along beta (|beta| = {:.3e})",
                    norm(&beta)
                )));
            }
        }
    }

    let baseline = breslow_baseline(&problem, beta.view());
    Ok(FittedCox {
        beta: beta.to_vec(),
        feature_names: dataset.feature_names().to_vec(),
        penalizer: options.penalizer,
        tie_rule: options.tie_rule,
        baseline,
        convergence: Convergence {
            iterations,
            gradient_norm: norm(&eval.gradient),
            objective: eval.value,
        },
    })
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn column_sds(x: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.columns()
        .into_iter()
        .map(|c| {
            let mean = c.sum() / n;
            (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

fn check_divergence(beta: &Array1<f64>, scales: &[f64]) -> Result<()> {
    for (j, (b, s)) in beta.iter().zip(scales).enumerate() {
        if !b.is_finite() || (b * s).abs() > DIVERGENCE_BOUND {
            return Err(Error::Divergence(format!(
                "coefficient {j} reached {b:.3e} (per-SD effect {:.3e})",
                b * s
            )));
        }
    }
    Ok(())
}

/// `H0(t) = sum over event times t_i <= t of d_i / sum_{j in R(t_i)} exp(beta . x_j)`.
pub fn breslow_baseline(problem: &CoxProblem<'_>, beta: ArrayView1<'_, f64>) -> BaselineHazard {
    let (eta, _) = problem.linear_predictor(beta);
    let durations = problem.durations();
    let events = problem.events();
    let order = problem.order();
    let mut s0 = 0.0;
    let mut shift = f64::NEG_INFINITY;
    let mut increments = Vec::new();
    for (start, end) in problem.groups_descending() {
        let group_max = order[start..end].iter().map(|&i| eta[i]).fold(f64::NEG_INFINITY, f64::max);
        if group_max > shift {
            s0 *= (shift - group_max).exp();
            shift = group_max;
        }
        let mut deaths = 0usize;
        for &i in &order[start..end] {
            s0 += (eta[i] - shift).exp();
            deaths += usize::from(events[i]);
        }
        if deaths > 0 {
            let t = durations[order[start]];
            let d = deaths as f64;
            let mut inc = d / s0 * (-shift).exp();
            if !inc.is_finite() {
                inc = (d.ln() - s0.ln() - shift).exp();
            }
            increments.push((t, inc));
        }
    }
    increments.reverse();
    let mut acc = 0.0;
    let (times, cumulative) = increments
        .into_iter()
        .map(|(t, inc)| {
            acc += inc;
            (t, acc)
        })
        .unzip();
    BaselineHazard { times, cumulative }
}

/// Breslow baseline for `fitted` evaluated on `dataset`.
pub fn baseline_cumulative_hazard(fitted: &FittedCox, dataset: &SurvivalDataset) -> Result<BaselineHazard> {
    ensure_dim(fitted.beta.len(), dataset.features().n_cols())?;
    let problem = CoxProblem::from_dataset(dataset)?;
    Ok(breslow_baseline(&problem, ArrayView1::from(&fitted.beta[..])))
}
