//! Cox proportional hazards: penalized partial likelihood, Newton fitting,
//! Breslow baseline, survival prediction and Schoenfeld diagnostics.

mod fit;
mod objective;
mod residuals;
mod summary;

pub use fit::{
    baseline_cumulative_hazard, breslow_baseline, fit_cox, BaselineHazard, Convergence,
    CoxOptions, FittedCox, DEFAULT_PENALIZER, FIVE_YEARS_DAYS,
};
pub use objective::{neg_log_partial_likelihood, CoxObjectiveEval, CoxProblem, TieRule};
pub use residuals::{schoenfeld_residuals, PhTest, SchoenfeldResiduals};
pub use summary::{cox_summary, CoxCoefficient};
