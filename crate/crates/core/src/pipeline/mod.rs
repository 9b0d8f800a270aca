//! Cross-validated runs: per fold, impute on the training rows, train a
//! classifier on the progression label, rank features by mean |SHAP|,
//! unite the top `j` with KFRE-8, fit a penalized Cox model and score it on
//! the held-out rows.

mod config;
mod report;
mod run;

pub use crate::survival::cox_summary;
pub use config::{Arm, Cohort, DataSource, Kfre8Spec, PipelineConfig, RunConfig};
pub use report::{
    cox_summary_csv, emit_report, load_report, render_report, selected_features_csv, Manifest, ManifestEntry, REPORT_FILES};
pub use run::{
    assemble_report, fold_assignment, run_fold, run_folds, run_pipeline, select_features, FoldArtifacts, FoldReport,
    RunReport, SelectedFeature,
};
