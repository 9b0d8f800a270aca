//! Shapley-guided feature selection for Cox proportional hazards models.
//!
//! The crate trains a binary classifier on a cohort, ranks features by mean
//! absolute Shapley value, unions the top features with the eight KFRE-8
//! clinical inputs and fits a ridge-penalized Cox model on the reduced set.
//! Everything runs under k-fold cross-validation with concordance, Brier
//! score and time-dependent AUROC on the held-out folds.
//!
//! Modules map onto pipeline stages:
//!
//! - [`data`]: timelines, progression labels, feature tables, synthetic cohorts
//! - [`classifiers`]: logistic regression, CART, random forest, gradient boosting, MLPs
//! - [`explain`]: exact, linear, tree and kernel Shapley explainers
//! - [`survival`]: Cox partial likelihood, Newton fitting, Breslow baseline, Schoenfeld residuals
//! - [`metrics`]: AUROC, C-index, Brier score, dynamic AUROC
//! - [`pipeline`]: cross-validated end-to-end runs and report emission

pub mod classifiers;
pub mod data;
mod error;
pub mod explain;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod survival;

pub use error::{Error, Result};

// Book chapters are compiled as doctests so their snippets stay runnable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cohorts.md")]
    mod cohorts {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/shapley.md")]
    mod shapley {}
    #[doc = include_str!("../../../book/src/cox.md")]
    mod cox {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
