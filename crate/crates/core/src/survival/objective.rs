//! Negative log partial likelihood with analytic gradient and Hessian.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    #[default]
    Efron,
    Breslow,
}

impl std::str::FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efron" => Ok(TieRule::Efron),
            "breslow" => Ok(TieRule::Breslow),
            other => Err(Error::InvalidConfig(format!("unknown tie rule `{other}`"))),
        }
    }
}

/// Penalized objective `-log L(beta) + penalizer/2 * |beta|^2` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxObjectiveEval {
    pub value: f64,
    pub gradient: Array1<f64>,
    pub hessian: Array2<f64>,
}

/// Outcomes and covariates sorted once so repeated evaluations are cheap.
#[derive(Debug, Clone)]
pub struct CoxProblem<'a> {
    x: ArrayView2<'a, f64>,
    durations: &'a [f64],
    events: &'a [bool],
    /// Row indices by ascending duration.
    order: Vec<usize>,
}

impl<'a> CoxProblem<'a> {
    pub fn new(x: ArrayView2<'a, f64>, durations: &'a [f64], events: &'a [bool]) -> Result<Self> {
        ensure_dim(x.nrows(), durations.len())?;
        ensure_dim(x.nrows(), events.len())?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData("covariates must be finite".into()));
        }
        if durations.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidData("durations must be finite".into()));
        }
        if !events.iter().any(|e| *e) {
            return Err(Error::NoEvents);
        }
        let mut order: Vec<usize> = (0..durations.len()).collect();
        order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));
        Ok(Self {
            x,
            durations,
            events,
            order,
        })
    }

    pub fn from_dataset(ds: &'a SurvivalDataset) -> Result<Self> {
        Self::new(ds.x(), ds.durations(), ds.events())
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'a, f64> {
        self.x
    }

    pub fn durations(&self) -> &'a [f64] {
        self.durations
    }

    pub fn events(&self) -> &'a [bool] {
        self.events
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// Linear predictor and its maximum, for exp-shift stabilization.
    pub(crate) fn linear_predictor(&self, beta: ArrayView1<'_, f64>) -> (Array1<f64>, f64) {
        let eta = self.x.dot(&beta);
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (eta, m)
    }

    /// Iterates distinct durations from latest to earliest, yielding the
    /// `[start, end)` range of `order` sharing each duration.
    pub(crate) fn groups_descending(&self) -> impl Iterator<Item = (usize, usize)> + use<'_, 'a> {
        let mut end = self.order.len();
        std::iter::from_fn(move || {
            if end == 0 {
                return None;
            }
            let t = self.durations[self.order[end - 1]];
            let mut start = end;
            while start > 0 && self.durations[self.order[start - 1]] == t {
                start -= 1;
            }
            let g = (start, end);
            end = start;
            Some(g)
        })
    }

    pub fn evaluate(
        &self,
        beta: ArrayView1<'_, f64>,
        penalizer: f64,
        tie_rule: TieRule,
    ) -> Result<CoxObjectiveEval> {
        let d = self.n_features();
        ensure_dim(d, beta.len())?;
        let (eta, m) = self.linear_predictor(beta);
        if !m.is_finite() {
            return Err(Error::Numerical("non-finite linear predictor".into()));
        }
        // weights are exp(eta - shift) with the shift raised to the running
        // maximum of the risk set, rescaling the accumulators as it moves
        let mut shift = f64::NEG_INFINITY;

        let mut s0 = 0.0;
        let mut s1 = Array1::<f64>::zeros(d);
        let mut s2 = Array2::<f64>::zeros((d, d));
        let mut loglik = 0.0;
        let mut score = Array1::<f64>::zeros(d);
        let mut info = Array2::<f64>::zeros((d, d));

        let mut t1 = Array1::<f64>::zeros(d);
        let mut t2 = Array2::<f64>::zeros((d, d));
        for (start, end) in self.groups_descending() {
            let mut t0 = 0.0;
            t1.fill(0.0);
            t2.fill(0.0);
            let mut n_events = 0usize;
            let group_max = self.order[start..end].iter().map(|&i| eta[i]).fold(f64::NEG_INFINITY, f64::max);
            if group_max > shift {
                let r = (shift - group_max).exp();
                s0 *= r;
                s1 *= r;
                s2 *= r;
                shift = group_max;
            }
            for &i in &self.order[start..end] {
                let xi = self.x.row(i);
                let wi = (eta[i] - shift).exp();
                s0 += wi;
                s1.scaled_add(wi, &xi);
                add_outer(&mut s2, wi, xi);
                if self.events[i] {
                    t0 += wi;
                    t1.scaled_add(wi, &xi);
                    add_outer(&mut t2, wi, xi);
                    n_events += 1;
                    loglik += eta[i];
                    score += &xi;
                }
            }
            if n_events == 0 {
                continue;
            }
            for l in 0..n_events {
                let frac = match tie_rule {
                    TieRule::Efron => l as f64 / n_events as f64,
                    TieRule::Breslow => 0.0,
                };
                let a0 = s0 - frac * t0;
                let a1 = &s1 - &(frac * &t1);
                let mean = &a1 / a0;
                loglik -= a0.ln() + shift;
                score -= &mean;
                for r in 0..d {
                    for c in 0..d {
                        info[[r, c]] += (s2[[r, c]] - frac * t2[[r, c]]) / a0 - mean[r] * mean[c];
                    }
                }
            }
        }

        let value = -loglik + 0.5 * penalizer * beta.dot(&beta);
        let gradient = -score + penalizer * &beta;
        let mut hessian = info;
        for r in 0..d {
            hessian[[r, r]] += penalizer;
        }
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite partial likelihood".into()));
        }
        Ok(CoxObjectiveEval {
            value,
            gradient,
            hessian,
        })
    }
}

fn add_outer(acc: &mut Array2<f64>, w: f64, x: ArrayView1<'_, f64>) {
    let d = x.len();
    for r in 0..d {
        let wr = w * x[r];
        if wr == 0.0 {
            continue;
        }
        for c in 0..d {
            acc[[r, c]] += wr * x[c];
        }
    }
}

/// Penalized negative log partial likelihood with gradient and Hessian.
pub fn neg_log_partial_likelihood(
    beta: &[f64],
    dataset: &SurvivalDataset,
    penalizer: f64,
    tie_rule: TieRule,
) -> Result<CoxObjectiveEval> {
    CoxProblem::from_dataset(dataset)?.evaluate(ArrayView1::from(beta), penalizer, tie_rule)
}
