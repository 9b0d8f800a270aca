use std::collections::BTreeSet;

use sha2::{Digest, Sha256};
use survshap::classifiers::Family;
use survshap::data::{generate_synthetic_cohort, SyntheticConfig, KFRE8_COLUMNS};
use survshap::explain::ExplainerBudget;
use survshap::pipeline::{emit_report, load_report, run_pipeline, Arm, Cohort, DataSource, PipelineConfig, RunReport, REPORT_FILES};
use survshap::Error;

fn cohort(seed: u64) -> Cohort {
    let cfg = SyntheticConfig {
        n_subjects: 300,
        n_signal_features: 3,
        n_noise_features: 6,
        true_beta: vec![0.8, -0.6, 0.5],
        censor_rate_target: 0.4,
        seed,
        kfre_beta: Some(vec![0.3, 0.1, -0.4, 0.3, 0.0, 0.1, 0.0, -0.2]),
        ..Default::default()
    };
    Cohort::from_survival(generate_synthetic_cohort(&cfg).unwrap().survival)
}

fn config(family: Arm) -> PipelineConfig {
    PipelineConfig {
        family,
        top_j: 5,
        k_folds: 3,
        seed: 17,
        horizons_days: vec![365.25, 730.5],
        explainer: ExplainerBudget {
            background: 20,
            explain_rows: 30,
            kernel_coalitions: 40,
            kernel_background: 3,
        },
        ..Default::default()
    }
}

fn run(c: &Cohort, cfg: &PipelineConfig) -> Result<RunReport, Error> {
    run_pipeline(&c.features, &c.survival, &c.labels, cfg)
}

fn names(report: &RunReport, fold: usize) -> BTreeSet<String> {
    report.folds[fold].selected.iter().map(|s| s.feature.clone()).collect()
}

fn kfre8() -> BTreeSet<String> {
    KFRE8_COLUMNS.iter().map(|s| s.to_string()).collect()
}

#[test]
fn baseline_uses_exactly_the_kfre8_columns() {
    let c = cohort(1);
    let report = run(&c, &config(Arm::Baseline)).unwrap();
    assert_eq!(report.folds.len(), 3);
    for f in &report.folds {
        assert_eq!(names(&report, f.fold), kfre8());
        assert!(f.selected.iter().all(|s| s.kfre8 && s.rank.is_none()));
        assert_eq!(f.auroc, None);
        assert_eq!(f.beta.len(), 8);
    }
}

#[test]
fn augmented_folds_contain_kfre8_within_size_bounds() {
    let c = cohort(2);
    let cfg = config(Arm::Classifier(Family::Lr));
    let report = run(&c, &cfg).unwrap();
    for f in &report.folds {
        let set = names(&report, f.fold);
        assert!(set.is_superset(&kfre8()));
        assert!((8..=cfg.top_j + 8).contains(&set.len()));
        let ranks: Vec<usize> = f.selected.iter().filter_map(|s| s.rank).collect();
        assert_eq!(ranks, (1..=cfg.top_j).collect::<Vec<_>>());
        assert_eq!(f.beta.len(), set.len());
        assert!(f.auroc.is_some());
        assert_eq!(f.n_train + f.n_test, 300);
    }
    let mean = report.folds.iter().map(|f| f.c_index).sum::<f64>() / 3.0;
    assert!((report.c_index_mean - mean).abs() < 1e-15);
    let best = report.folds.iter().map(|f| f.c_index).fold(f64::MIN, f64::max);
    assert_eq!(report.folds[report.best_fold].c_index, best);
}

#[test]
fn report_files_match_the_manifest_and_reload() {
    let c = cohort(3);
    let report = run(&c, &config(Arm::Classifier(Family::Dt))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_report(&report, dir.path()).unwrap();
    let listed: Vec<&str> = manifest.files.iter().map(|e| e.file.as_str()).collect();
    assert_eq!(listed, REPORT_FILES);
    for e in &manifest.files {
        let bytes = std::fs::read(dir.path().join(&e.file)).unwrap();
        assert_eq!(e.bytes, bytes.len() as u64);
        assert_eq!(e.sha256, hex::encode(Sha256::digest(&bytes)));
    }
    assert_eq!(load_report(dir.path().join("metrics.json")).unwrap(), report);

    // the cross-fold mean row is the arithmetic mean of the fold rows
    let mut rdr = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let c_rows: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[0] == "c_index").collect();
    let per_fold: Vec<f64> = c_rows.iter().filter(|r| r[1].parse::<usize>().is_ok()).map(|r| r[3].parse().unwrap()).collect();
    let mean: f64 = c_rows.iter().find(|r| &r[1] == "mean").unwrap()[3].parse().unwrap();
    assert_eq!(per_fold.len(), 3);
    assert!((mean - per_fold.iter().sum::<f64>() / 3.0).abs() < 1e-15);
}

#[test]
fn empty_horizons_give_header_only_curves() {
    let c = cohort(4);
    let cfg = PipelineConfig {
        horizons_days: vec![],
        ..config(Arm::Baseline)
    };
    let report = run(&c, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_report(&report, dir.path()).unwrap();
    assert_eq!(manifest.files.len(), 6);
    let brier = std::fs::read_to_string(dir.path().join("brier_curve.csv")).unwrap();
    let auc = std::fs::read_to_string(dir.path().join("dynamic_auc_curve.csv")).unwrap();
    assert_eq!(brier, "fold,horizon_days,brier\n");
    assert_eq!(auc, "fold,time_days,auc,n_cases,n_controls\n");
}

#[test]
fn union_of_families_contains_the_single_family_selection() {
    let c = cohort(5);
    let single = run(&c, &config(Arm::Classifier(Family::Gbt))).unwrap();
    let union = run(
        &c,
        &PipelineConfig {
            union_all_families: true,
            ..config(Arm::Classifier(Family::Gbt))
        },
    )
    .unwrap();
    for f in 0..3 {
        let (s, u) = (names(&single, f), names(&union, f));
        assert!(u.is_superset(&s), "fold {f}");
        assert!(u.len() <= 6 * 5 + 8);
    }
}

#[test]
fn csv_sourced_run_matches_the_in_memory_run() {
    let c = cohort(6);
    let dir = tempfile::tempdir().unwrap();
    c.features.write_csv(std::fs::File::create(dir.path().join("features.csv")).unwrap()).unwrap();
    c.survival.write_outcomes_csv(std::fs::File::create(dir.path().join("outcomes.csv")).unwrap()).unwrap();
    let source = DataSource {
        synthetic: None,
        features: Some("features.csv".into()),
        outcomes: Some("outcomes.csv".into()),
    };
    let loaded = source.load(dir.path()).unwrap();
    assert_eq!(loaded.labels, c.labels);
    let cfg = config(Arm::Classifier(Family::Lr));
    assert_eq!(run(&loaded, &cfg).unwrap().folds, run(&c, &cfg).unwrap().folds);
}

#[test]
fn stage_failures_name_the_fold_and_stage() {
    let c = cohort(7);
    let one_class = Cohort {
        labels: vec![false; c.labels.len()],
        ..c
    };
    match run(&one_class, &config(Arm::Classifier(Family::Lr))) {
        Err(Error::Stage { fold, stage, .. }) => assert_eq!((fold, stage), (0, "train")),
        other => panic!("expected a stage error, got {other:?}"),
    }
}

#[test]
fn invalid_kfre8_mapping_is_rejected() {
    let c = cohort(8);
    let mut cfg = config(Arm::Baseline);
    cfg.kfre8.egfr = "not_a_column".into();
    assert!(run(&c, &cfg).is_err());
}
