use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::config::{Arm, Kfre8Spec, PipelineConfig};
use crate::classifiers::{train, Classifier, Family};
use crate::data::{split_folds, train_indices, FeatureMatrix, Standardizer, SurvivalDataset};
use crate::error::{ensure_dim, Error, Result};
use crate::explain::{explain_model, mean_abs_ranking, Background, FeatureRanking};
use crate::metrics::{
    auroc, brier_from_predictions, concordance_index, dynamic_auc, mean_sd, DynamicAucPoint, MetricReport, TieCredit,
};
use crate::rng::{derive_seed, stream};
use crate::survival::{cox_summary, fit_cox, schoenfeld_residuals, CoxCoefficient, CoxOptions, FittedCox, PhTest};

/// A feature in the Cox set, with its attribution rank when it came from
/// the ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub feature: String,
    pub rank: Option<usize>,
    pub mean_abs_shap: Option<f64>,
    pub kfre8: bool,
}

/// `F = top_j(ranking) ∪ KFRE-8`: ranked features first, then any KFRE-8
/// columns not already present. Takes the whole ranking when `j` exceeds it.
pub fn select_features(ranking: &FeatureRanking, j: usize, kfre8: &Kfre8Spec) -> Result<Vec<SelectedFeature>> {
    select_from_rankings(&[ranking], j, kfre8)
}

fn select_from_rankings(rankings: &[&FeatureRanking], j: usize, kfre8: &Kfre8Spec) -> Result<Vec<SelectedFeature>> {
    let mut out: Vec<SelectedFeature> = Vec::new();
    for ranking in rankings {
        if ranking.is_empty() && j > 0 {
            return Err(Error::Empty("feature ranking is empty".into()));
        }
        if j > ranking.len() {
            log::warn!("top-j of {j} exceeds the {} ranked features; taking all", ranking.len());
        }
        for (rank, e) in ranking.entries.iter().take(j).enumerate() {
            if out.iter().any(|s| s.feature == e.feature) {
                continue;
            }
            out.push(SelectedFeature {
                feature: e.feature.clone(),
                rank: Some(rank + 1),
                mean_abs_shap: Some(e.mean_abs),
                kfre8: kfre8.contains(&e.feature),
            });
        }
    }
    for c in kfre8.columns() {
        if !out.iter().any(|s| s.feature == c) {
            out.push(SelectedFeature {
                feature: c.to_string(),
                rank: None,
                mean_abs_shap: None,
                kfre8: true,
            });
        }
    }
    Ok(out)
}

/// Everything one fold produced. Only training rows shape the
/// standardizer, rankings and Cox fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldArtifacts {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub standardizer: Standardizer,
    pub rankings: Vec<(Family, FeatureRanking)>,
    pub selected: Vec<SelectedFeature>,
    pub cox: FittedCox,
    /// Standardized training data restricted to the selected features.
    pub cox_train: SurvivalDataset,
    pub auroc: Option<f64>,
    pub accuracy: Option<f64>,
    pub c_index: f64,
    pub brier: Vec<(f64, f64)>,
    pub dynamic_auc: Vec<DynamicAucPoint>,
}

fn check_inputs(features: &FeatureMatrix, survival: &SurvivalDataset, labels: &[bool], config: &PipelineConfig) -> Result<()> {
    config.validate()?;
    ensure_dim(features.n_rows(), survival.len())?;
    ensure_dim(features.n_rows(), labels.len())?;
    config.kfre8.validate(features)
}

pub fn fold_assignment(n: usize, config: &PipelineConfig) -> Result<Vec<Vec<usize>>> {
    split_folds(n, config.k_folds, derive_seed(config.seed, stream::FOLDS))
}

/// Runs fold `f`: impute, train, explain, select, fit Cox, evaluate.
pub fn run_fold(
    features: &FeatureMatrix,
    survival: &SurvivalDataset,
    labels: &[bool],
    config: &PipelineConfig,
    folds: &[Vec<usize>],
    f: usize,
) -> Result<FoldArtifacts> {
    check_inputs(features, survival, labels, config)?;
    let fold_seed = derive_seed(config.seed, stream::FOLD_BASE + f as u64);
    let train_rows = train_indices(folds, f);
    let test_rows = folds[f].clone();

    let raw_train = features.select_rows(&train_rows);
    let standardizer = Standardizer::fit(&raw_train, config.imputation).map_err(|e| e.at_stage(f, "impute"))?;
    let x_train = standardizer.transform(&raw_train).map_err(|e| e.at_stage(f, "impute"))?;
    let x_test = standardizer
        .transform(&features.select_rows(&test_rows))
        .map_err(|e| e.at_stage(f, "impute"))?;
    let y_train: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<bool> = test_rows.iter().map(|&i| labels[i]).collect();

    let mut rankings = Vec::new();
    let (mut auroc_v, mut accuracy) = (None, None);
    if let Arm::Classifier(primary) = config.family {
        let families: Vec<Family> = if config.union_all_families {
            Family::ALL.to_vec()
        } else {
            vec![primary]
        };
        let background = Background::sample(
            x_train.values(),
            config.explainer.background,
            derive_seed(fold_seed, stream::BACKGROUND),
        )
        .map_err(|e| e.at_stage(f, "explain"))?;
        let explain_rows = Background::sample(
            x_train.values(),
            config.explainer.explain_rows,
            derive_seed(fold_seed, stream::EXPLAIN),
        )
        .map_err(|e| e.at_stage(f, "explain"))?;
        for fam in families {
            let seed = derive_seed(fold_seed, stream::CLASSIFIER ^ ((fam as u64) << 8));
            let model = train(&config.train_config(fam), x_train.values(), &y_train, seed).map_err(|e| e.at_stage(f, "train"))?;
            if fam == primary {
                let p = model.predict_proba(x_test.values()).map_err(|e| e.at_stage(f, "train"))?;
                let p = p.as_slice().expect("contiguous");
                auroc_v = match auroc(p, &y_test) {
                    Ok(v) => Some(v),
                    Err(Error::Undefined(m)) => {
                        log::warn!("fold {f}: classifier AUROC undefined ({m})");
                        None
                    }
                    Err(e) => return Err(e.at_stage(f, "train")),
                };
                let correct = p.iter().zip(&y_test).filter(|(p, y)| (**p >= config.tau) == **y).count();
                accuracy = Some(correct as f64 / y_test.len() as f64);
            }
            let attributions = explain_model(
                &model,
                explain_rows.rows(),
                &background,
                x_train.column_names().to_vec(),
                &config.explainer,
                derive_seed(fold_seed, stream::EXPLAIN ^ ((fam as u64) << 8)),
            )
            .map_err(|e| e.at_stage(f, "explain"))?;
            rankings.push((fam, mean_abs_ranking(&attributions).map_err(|e| e.at_stage(f, "rank"))?));
        }
    }

    let selected = if rankings.is_empty() {
        select_from_rankings(&[], 0, &config.kfre8)
    } else {
        let refs: Vec<&FeatureRanking> = rankings.iter().map(|(_, r)| r).collect();
        select_from_rankings(&refs, config.top_j, &config.kfre8)
    }
    .map_err(|e| e.at_stage(f, "select"))?;
    let names: Vec<&str> = selected.iter().map(|s| s.feature.as_str()).collect();

    let cox_train = survival
        .select_rows(&train_rows)
        .with_features(x_train.select_columns(&names)?)
        .map_err(|e| e.at_stage(f, "cox"))?;
    let options = CoxOptions {
        penalizer: config.penalizer,
        tie_rule: config.tie_rule,
        ..Default::default()
    };
    let cox = fit_cox(&cox_train, &options).map_err(|e| e.at_stage(f, "cox"))?;

    let test = survival.select_rows(&test_rows);
    let x_cox_test = x_test.select_columns(&names)?;
    let pi = cox.prognostic_index(x_cox_test.values()).map_err(|e| e.at_stage(f, "evaluate"))?;
    let pi = pi.as_slice().expect("contiguous");
    let c_index = concordance_index(pi, test.durations(), test.events(), TieCredit::Half).map_err(|e| e.at_stage(f, "evaluate"))?;
    let mut brier = Vec::with_capacity(config.horizons_days.len());
    for &h in &config.horizons_days {
        let pred = x_cox_test
            .values()
            .axis_iter(Axis(0))
            .map(|row| cox.predict_survival(row, h))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| e.at_stage(f, "evaluate"))?;
        let b = brier_from_predictions(&pred, test.durations(), test.events(), h, config.brier_mode)
            .map_err(|e| e.at_stage(f, "evaluate"))?;
        brier.push((h, b));
    }
    let dyn_auc = dynamic_auc(pi, test.durations(), test.events(), &config.horizons_days).map_err(|e| e.at_stage(f, "evaluate"))?;

    Ok(FoldArtifacts {
        fold: f,
        train_rows,
        test_rows,
        standardizer,
        rankings,
        selected,
        cox,
        cox_train,
        auroc: auroc_v,
        accuracy,
        c_index,
        brier,
        dynamic_auc: dyn_auc,
    })
}

/// Runs every fold, `config.jobs` at a time, returning artifacts in fold order.
pub fn run_folds(features: &FeatureMatrix, survival: &SurvivalDataset, labels: &[bool], config: &PipelineConfig) -> Result<Vec<FoldArtifacts>> {
    check_inputs(features, survival, labels, config)?;
    let folds = fold_assignment(features.n_rows(), config)?;
    let k = folds.len();
    let results: Mutex<Vec<Option<Result<FoldArtifacts>>>> = Mutex::new((0..k).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = config.jobs.min(k);
    let work = || loop {
        let f = next.fetch_add(1, Ordering::SeqCst);
        if f >= k {
            break;
        }
        log::info!("fold {f}: start");
        let r = run_fold(features, survival, labels, config, &folds, f);
        results.lock().expect("poisoned")[f] = Some(r);
    };
    if workers <= 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    results
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub auroc: Option<f64>,
    pub accuracy: Option<f64>,
    pub c_index: f64,
    pub brier: Vec<(f64, f64)>,
    pub dynamic_auc: Vec<DynamicAucPoint>,
    pub selected: Vec<SelectedFeature>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub folds: Vec<FoldReport>,
    pub metrics: MetricReport,
    pub c_index_mean: f64,
    pub c_index_sd: f64,
    /// Fold with the highest held-out C-index; the coefficient table and
    /// proportional-hazards tests come from its Cox fit.
    pub best_fold: usize,
    pub cox_summary: Vec<CoxCoefficient>,
    pub schoenfeld: Vec<PhTest>,
}

pub fn assemble_report(config: &PipelineConfig, artifacts: &[FoldArtifacts]) -> Result<RunReport> {
    let best = artifacts
        .iter()
        .fold(None::<&FoldArtifacts>, |b, a| match b {
            Some(b) if b.c_index >= a.c_index => Some(b),
            _ => Some(a),
        })
        .ok_or_else(|| Error::Empty("no folds".into()))?;
    let summary = cox_summary(&best.cox, &best.cox_train).map_err(|e| e.at_stage(best.fold, "summary"))?;
    let schoenfeld = schoenfeld_residuals(&best.cox, &best.cox_train)
        .map_err(|e| e.at_stage(best.fold, "schoenfeld"))?
        .tests;
    let c: Vec<f64> = artifacts.iter().map(|a| a.c_index).collect();
    let (c_index_mean, c_index_sd) = mean_sd(&c).expect("non-empty");
    Ok(RunReport {
        config: config.clone(),
        folds: artifacts
            .iter()
            .map(|a| FoldReport {
                fold: a.fold,
                n_train: a.train_rows.len(),
                n_test: a.test_rows.len(),
                auroc: a.auroc,
                accuracy: a.accuracy,
                c_index: a.c_index,
                brier: a.brier.clone(),
                dynamic_auc: a.dynamic_auc.clone(),
                selected: a.selected.clone(),
                beta: a.cox.beta.clone(),
            })
            .collect(),
        metrics: MetricReport {
            auroc: artifacts.iter().map(|a| a.auroc).collect(),
            accuracy: artifacts.iter().map(|a| a.accuracy).collect(),
            c_index: c,
            brier: artifacts.iter().map(|a| a.brier.clone()).collect(),
            dynamic_auc: artifacts.iter().map(|a| a.dynamic_auc.clone()).collect(),
        },
        c_index_mean,
        c_index_sd,
        best_fold: best.fold,
        cox_summary: summary,
        schoenfeld,
    })
}

/// Cross-validated end-to-end run.
pub fn run_pipeline(features: &FeatureMatrix, survival: &SurvivalDataset, labels: &[bool], config: &PipelineConfig) -> Result<RunReport> {
    let artifacts = run_folds(features, survival, labels, config)?;
    assemble_report(config, &artifacts)
}
