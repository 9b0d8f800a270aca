//! Discrimination and calibration metrics for classifiers and survival models.

mod brier;
mod discrimination;
mod report;

pub use brier::{brier_from_predictions, brier_score, BrierMode};
pub use discrimination::{
    auroc, concordance_counts, concordance_index, dynamic_auc, DynamicAucPoint, PairCounts,
    TieCredit,
};
pub use report::{mean_sd, MetricReport, MetricRow};

/// Horizons at one through five years, in days.
pub fn yearly_horizons(years: usize) -> Vec<f64> {
    (1..=years).map(|y| y as f64 * 365.25).collect()
}
