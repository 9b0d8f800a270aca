//! Cohort data: diagnosis timelines, feature tables, survival outcomes,
//! synthetic cohorts and cross-validation folds.

mod features;
mod folds;
mod survival;
mod synthetic;
mod timeline;

pub use features::{
    impute_and_standardize, ColumnKind, ColumnTransform, FeatureMatrix, ImputationPolicy,
    Standardizer,
};
pub use folds::{split_folds, train_indices};
pub use survival::{
    join_outcomes, load_survival_dataset, read_outcomes, write_outcomes, OutcomeRow,
    SurvivalDataset, ZERO_DURATION_SHIFT,
};
pub use synthetic::{
    generate_synthetic_cohort, GroundTruth, SyntheticCohort, SyntheticConfig, KFRE8_COLUMNS,
};
pub use timeline::{
    format_iso_date, label_progression, load_cohort_events, parse_iso_date, read_cohort_events,
    stage_rank, Day, DiagnosisEvent, ProgressionLabel, SubjectTimeline, STAGED_CODES,
    UNSPECIFIED_CKD,
};
