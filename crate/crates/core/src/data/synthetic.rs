//! Synthetic cohorts with a known proportional-hazards generator.
//!
//! Event times follow a Weibull baseline, `H0(t) = (t / scale)^shape`,
//! scaled by `exp(beta . x)`. Censoring times are exponential with a rate
//! bisected until the realized censored fraction hits the target.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{ColumnKind, FeatureMatrix};
use super::survival::SurvivalDataset;
use crate::error::{Error, Result};
use crate::rng::rng;

/// Column names the generator uses for the eight KFRE-8 inputs.
pub const KFRE8_COLUMNS: [&str; 8] = [
    "age",
    "sex",
    "egfr",
    "uacr",
    "serum_calcium",
    "serum_phosphorus",
    "serum_bicarbonate",
    "serum_albumin",
];

const CENSOR_TOLERANCE: f64 = 0.01;
const CALIBRATION_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub n_signal_features: usize,
    pub n_noise_features: usize,
    pub true_beta: Vec<f64>,
    pub baseline_shape: f64,
    pub baseline_scale: f64,
    pub censor_rate_target: f64,
    pub seed: u64,
    /// When set, eight named KFRE-8 columns are generated with these effects.
    #[serde(default)]
    pub kfre_beta: Option<Vec<f64>>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_subjects: 2000,
            n_signal_features: 4,
            n_noise_features: 0,
            true_beta: vec![1.0, -0.5, 0.0, 0.0],
            baseline_shape: 1.5,
            baseline_scale: 1000.0,
            censor_rate_target: 0.3,
            seed: 0,
            kfre_beta: None,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_subjects == 0 {
            return fail("n_subjects must be positive");
        }
        if self.true_beta.len() != self.n_signal_features {
            return fail("true_beta length must equal n_signal_features");
        }
        if !(self.censor_rate_target > 0.0 && self.censor_rate_target < 1.0) {
            return fail("censor_rate_target must lie strictly inside (0, 1)");
        }
        if !(self.baseline_shape > 0.0 && self.baseline_scale > 0.0) {
            return fail("Weibull shape and scale must be positive");
        }
        if let Some(k) = &self.kfre_beta {
            if k.len() != KFRE8_COLUMNS.len() {
                return fail("kfre_beta must have eight entries");
            }
        }
        if self.true_beta.iter().chain(self.kfre_beta.iter().flatten()).any(|b| !b.is_finite()) {
            return fail("coefficients must be finite");
        }
        Ok(())
    }
}

/// Serialized as `{"true_beta": [...], "seed": ..., "censor_fraction": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_beta: Vec<f64>,
    pub seed: u64,
    pub censor_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub features: FeatureMatrix,
    pub survival: SurvivalDataset,
    pub truth: GroundTruth,
    /// Censoring rate found by calibration.
    pub censor_rate: f64,
}

impl SyntheticCohort {
    /// Progression labels for classifier training: the event indicator.
    pub fn labels(&self) -> Vec<bool> {
        self.survival.events().to_vec()
    }
}

pub fn generate_synthetic_cohort(config: &SyntheticConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let n = config.n_subjects;
    let mut rng = rng(config.seed);

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    if config.kfre_beta.is_some() {
        for name in KFRE8_COLUMNS {
            names.push(name.to_string());
            kinds.push(if name == "sex" {
                ColumnKind::DemographicIndicator
            } else {
                ColumnKind::LabAggregate
            });
        }
    }
    for j in 0..config.n_signal_features {
        names.push(format!("signal_{j}"));
        kinds.push(ColumnKind::LabAggregate);
    }
    for j in 0..config.n_noise_features {
        names.push(format!("noise_{j}"));
        kinds.push(ColumnKind::LabAggregate);
    }
    let beta: Vec<f64> = config
        .kfre_beta
        .iter()
        .flatten()
        .chain(&config.true_beta)
        .copied()
        .chain(std::iter::repeat_n(0.0, config.n_noise_features))
        .collect();

    let p = names.len();
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = if kinds[j] == ColumnKind::DemographicIndicator {
                f64::from(u8::from(rng.random::<bool>()))
            } else {
                rng.sample(StandardNormal)
            };
        }
    }

    let mut event_times = Vec::with_capacity(n);
    let mut censor_draws = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
        let e: f64 = rng.sample(Exp1);
        let t = config.baseline_scale * (e * (-eta).exp()).powf(1.0 / config.baseline_shape);
        event_times.push(t.max(f64::MIN_POSITIVE));
        censor_draws.push(rng.sample::<f64, _>(Exp1));
    }

    let censored_fraction = |rate: f64| {
        event_times
            .iter()
            .zip(&censor_draws)
            .filter(|(t, c)| **c / rate < **t)
            .count() as f64
            / n as f64
    };
    // fraction is nondecreasing in the rate; bisect in log space
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    let target = config.censor_rate_target;
    for _ in 0..CALIBRATION_ITERS {
        let mid = 0.5 * (lo + hi);
        if censored_fraction(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rate = {
        let (flo, fhi) = (censored_fraction(lo.exp()), censored_fraction(hi.exp()));
        if (flo - target).abs() <= (fhi - target).abs() {
            lo.exp()
        } else {
            hi.exp()
        }
    };
    let realized = censored_fraction(rate);
    if (realized - target).abs() > CENSOR_TOLERANCE {
        return Err(Error::InvalidConfig(format!(
            "censoring target {target} unachievable (closest realized fraction {realized:.4} with n={n})"
        )));
    }

    let mut durations = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for (t, c) in event_times.iter().zip(&censor_draws) {
        let c = c / rate;
        if c < *t {
            durations.push(c.max(f64::MIN_POSITIVE));
            events.push(false);
        } else {
            durations.push(*t);
            events.push(true);
        }
    }

    let row_ids = (0..n).map(|i| format!("S{i:06}")).collect();
    let features = FeatureMatrix::new(row_ids, names, kinds, x)?;
    let survival = SurvivalDataset::new(durations, events, features.clone())?;
    Ok(SyntheticCohort {
        features,
        survival,
        truth: GroundTruth {
            true_beta: config.true_beta.clone(),
            seed: config.seed,
            censor_fraction: realized,
        },
        censor_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn null_effects_are_uncorrelated_with_duration() {
        let cohort = generate_synthetic_cohort(&SyntheticConfig {
            true_beta: vec![0.0; 4],
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        for j in 0..4 {
            let col = cohort.features.values().column(j).to_vec();
            let rho = spearman(&col, cohort.survival.durations());
            assert!(rho.abs() <= 0.1, "feature {j}: rho {rho}");
        }
    }

    #[test]
    fn censoring_is_calibrated() {
        let cohort = generate_synthetic_cohort(&SyntheticConfig {
            n_subjects: 5000,
            censor_rate_target: 0.3,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let frac = 1.0 - cohort.survival.n_events() as f64 / 5000.0;
        assert!((0.27..=0.33).contains(&frac), "{frac}");
        assert!((frac - cohort.truth.censor_fraction).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = SyntheticConfig {
            n_subjects: 300,
            n_noise_features: 3,
            kfre_beta: Some(vec![0.1; 8]),
            seed: 99,
            ..Default::default()
        };
        let a = generate_synthetic_cohort(&cfg).unwrap();
        let b = generate_synthetic_cohort(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.features.n_cols(), 8 + 4 + 3);
        assert!(a.features.column_index("serum_albumin").is_some());
    }

    #[test]
    fn high_risk_quartile_fails_sooner() {
        let cohort = generate_synthetic_cohort(&SyntheticConfig {
            n_signal_features: 1,
            true_beta: vec![1.0],
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        let x = cohort.features.values().column(0).to_vec();
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let q = x.len() / 4;
        let d = cohort.survival.durations();
        let mean = |s: &[usize]| s.iter().map(|&i| d[i]).sum::<f64>() / s.len() as f64;
        assert!(mean(&idx[x.len() - q..]) < mean(&idx[..q]));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SyntheticConfig {
            censor_rate_target: 1.0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic_cohort(&bad), Err(Error::InvalidConfig(_))));
        let bad = SyntheticConfig {
            true_beta: vec![1.0],
            ..Default::default()
        };
        assert!(generate_synthetic_cohort(&bad).is_err());
        // only multiples of 1/5 are reachable with five subjects
        let tiny = SyntheticConfig {
            n_subjects: 5,
            censor_rate_target: 0.3,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic_cohort(&tiny), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ground_truth_json_shape() {
        let truth = GroundTruth {
            true_beta: vec![1.0, -0.5],
            seed: 7,
            censor_fraction: 0.3,
        };
        let s = serde_json::to_string(&truth).unwrap();
        assert_eq!(s, r#"{"true_beta":[1.0,-0.5],"seed":7,"censor_fraction":0.3}"#);
    }
}
