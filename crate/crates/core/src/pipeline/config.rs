use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Family, TrainConfig};
use crate::data::{
    generate_synthetic_cohort, load_survival_dataset, FeatureMatrix, ImputationPolicy, SurvivalDataset,
    SyntheticConfig, KFRE8_COLUMNS,
};
use crate::error::{Error, Result};
use crate::explain::ExplainerBudget;
use crate::metrics::{yearly_horizons, BrierMode};
use crate::survival::{TieRule, DEFAULT_PENALIZER};

/// Column names holding the eight KFRE-8 inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kfre8Spec {
    pub age: String,
    pub sex: String,
    pub egfr: String,
    pub uacr: String,
    pub serum_calcium: String,
    pub serum_phosphorus: String,
    pub serum_bicarbonate: String,
    pub serum_albumin: String,
}

impl Default for Kfre8Spec {
    fn default() -> Self {
        let [age, sex, egfr, uacr, serum_calcium, serum_phosphorus, serum_bicarbonate, serum_albumin] =
            KFRE8_COLUMNS.map(String::from);
        Self {
            age,
            sex,
            egfr,
            uacr,
            serum_calcium,
            serum_phosphorus,
            serum_bicarbonate,
            serum_albumin,
        }
    }
}

impl Kfre8Spec {
    pub fn columns(&self) -> [&str; 8] {
        [
            &self.age,
            &self.sex,
            &self.egfr,
            &self.uacr,
            &self.serum_calcium,
            &self.serum_phosphorus,
            &self.serum_bicarbonate,
            &self.serum_albumin,
        ]
        .map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns().contains(&name)
    }

    /// All eight columns exist in `features` and are distinct.
    pub fn validate(&self, features: &FeatureMatrix) -> Result<()> {
        let cols = self.columns();
        for (i, c) in cols.iter().enumerate() {
            if features.column_index(c).is_none() {
                return Err(Error::UnknownColumn(c.to_string()));
            }
            if cols[..i].contains(c) {
                return Err(Error::InvalidConfig(format!("KFRE-8 column `{c}` is mapped twice")));
            }
        }
        Ok(())
    }
}

/// Which features feed the Cox model: KFRE-8 alone, or KFRE-8 augmented
/// with the top attributions of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Arm {
    Baseline,
    Classifier(Family),
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Baseline => f.write_str("baseline"),
            Arm::Classifier(fam) => fam.fmt(f),
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "baseline" {
            Ok(Arm::Baseline)
        } else {
            s.parse().map(Arm::Classifier)
        }
    }
}

impl TryFrom<String> for Arm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Arm> for String {
    fn from(a: Arm) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub family: Arm,
    /// Number of top-ranked features united with KFRE-8.
    pub top_j: usize,
    pub k_folds: usize,
    pub penalizer: f64,
    pub tie_rule: TieRule,
    /// Classification threshold for fold accuracy.
    pub tau: f64,
    pub seed: u64,
    pub explainer: ExplainerBudget,
    pub horizons_days: Vec<f64>,
    pub brier_mode: BrierMode,
    /// Union the top features of all six families instead of one.
    pub union_all_families: bool,
    /// Folds run concurrently; results do not depend on this.
    pub jobs: usize,
    pub kfre8: Kfre8Spec,
    pub imputation: ImputationPolicy,
    /// Hyperparameters for `family`; the tuned preset when absent.
    pub train: Option<TrainConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            family: Arm::Classifier(Family::Gbt),
            top_j: 40,
            k_folds: 5,
            penalizer: DEFAULT_PENALIZER,
            tie_rule: TieRule::Efron,
            tau: 0.5,
            seed: 0,
            explainer: ExplainerBudget::default(),
            horizons_days: yearly_horizons(5),
            brier_mode: BrierMode::Literal,
            union_all_families: false,
            jobs: 1,
            kfre8: Kfre8Spec::default(),
            imputation: ImputationPolicy::MedianStandardize,
            train: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k_folds < 2 {
            return bad(format!("k_folds must be at least 2, got {}", self.k_folds));
        }
        if !(self.penalizer >= 0.0 && self.penalizer.is_finite()) {
            return bad(format!("penalizer must be a non-negative number, got {}", self.penalizer));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.horizons_days.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return bad("horizons must be positive and finite".into());
        }
        let b = &self.explainer;
        if b.background == 0 || b.explain_rows == 0 || b.kernel_background == 0 {
            return bad("explainer sample sizes must be positive".into());
        }
        if let (Some(t), Arm::Classifier(f)) = (&self.train, self.family) {
            if t.family() != f {
                return bad(format!("train config is for `{}` but family is `{f}`", t.family()));
            }
        }
        Ok(())
    }

    /// Hyperparameters used for `family` in this run.
    pub fn train_config(&self, family: Family) -> TrainConfig {
        match &self.train {
            Some(t) if t.family() == family => t.clone(),
            _ => TrainConfig::preset(family),
        }
    }
}

/// Where the cohort comes from: a synthetic generator or feature and
/// outcome CSV files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub synthetic: Option<SyntheticConfig>,
    pub features: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
}

/// A cohort ready for the pipeline. Labels are the event indicators, so
/// classifier and Cox targets come from the same labeler.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub features: FeatureMatrix,
    pub survival: SurvivalDataset,
    pub labels: Vec<bool>,
}

impl Cohort {
    pub fn from_survival(survival: SurvivalDataset) -> Self {
        Self {
            features: survival.features().clone(),
            labels: survival.events().to_vec(),
            survival,
        }
    }
}

impl DataSource {
    /// Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Cohort> {
        match (&self.synthetic, &self.features, &self.outcomes) {
            (Some(cfg), None, None) => Ok(Cohort::from_survival(generate_synthetic_cohort(cfg)?.survival)),
            (None, Some(f), Some(o)) => Ok(Cohort::from_survival(load_survival_dataset(base.join(f), base.join(o))?)),
            _ => Err(Error::InvalidConfig(
                "data must give either `synthetic` or both `features` and `outcomes`".into(),
            )),
        }
    }
}

/// The JSON run document: pipeline settings plus the data source.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

// serde ignores `deny_unknown_fields` inside a flattened struct, so the
// pipeline keys are split off and deserialized strictly by hand.
impl<'de> Deserialize<'de> for RunConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut map = serde_json::Map::deserialize(deserializer)?;
        let data = match map.remove("data") {
            Some(v) => serde_json::from_value(v).map_err(D::Error::custom)?,
            None => DataSource::default(),
        };
        let pipeline = serde_json::from_value(serde_json::Value::Object(map)).map_err(D::Error::custom)?;
        Ok(Self { data, pipeline })
    }
}
