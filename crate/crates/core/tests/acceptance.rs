//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use survshap::classifiers::{
    train_forest, train_gbt, train_tree, Classifier, Family, ForestConfig, GbtConfig, LinearModel, MaxFeatures, MlpArch,
    MlpModel, TreeConfig,
};
use survshap::data::{generate_synthetic_cohort, FeatureMatrix, SurvivalDataset, SyntheticConfig, KFRE8_COLUMNS};
use survshap::explain::{exact_shapley, kernel_shap, linear_shap, tree_shap, Background, Explanation, FeatureRanking, RankedFeature};
use survshap::metrics::{auroc, brier_from_predictions, concordance_index, dynamic_auc, BrierMode, TieCredit};
use survshap::pipeline::{
    emit_report, fold_assignment, run_fold, run_pipeline, select_features, Arm, Kfre8Spec, PipelineConfig,
};
use survshap::rng::{rng, Rng};
use survshap::survival::{breslow_baseline, fit_cox, neg_log_partial_likelihood, CoxOptions, CoxProblem, TieRule};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal_matrix(r: &mut Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || r.sample(StandardNormal))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; zero when both vanish.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn labels_from(x: ArrayView2<'_, f64>, r: &mut Rng) -> Vec<bool> {
    x.rows()
        .into_iter()
        .map(|row| {
            let z = row.iter().enumerate().map(|(j, v)| v * (1.0 - 0.3 * j as f64)).sum::<f64>();
            r.random::<f64>() < 1.0 / (1.0 + (-z).exp())
        })
        .collect()
}

fn random_linear(r: &mut Rng, n: usize) -> LinearModel {
    LinearModel {
        weights: (0..n).map(|_| r.sample(StandardNormal)).collect(),
        intercept: r.sample(StandardNormal),
    }
}

fn small_forest() -> ForestConfig {
    ForestConfig {
        n_estimators: 4,
        max_depth: 4,
        min_samples_split: 2,
        min_samples_leaf: 1,
        max_features: MaxFeatures::Sqrt,
        bootstrap: true,
    }
}

fn small_gbt() -> GbtConfig {
    GbtConfig {
        n_estimators: 4,
        max_depth: 3,
        gamma: 0.0,
        ..Default::default()
    }
}

fn small_tree() -> TreeConfig {
    TreeConfig {
        max_depth: 4,
        min_samples_split: 2,
        min_samples_leaf: 1,
    }
}

fn check_phi(name: &str, got: &Explanation, want: &Explanation, tol: f64) -> Result<f64, String> {
    let d = max_abs_diff(&got.values, &want.values).max((got.base_value - want.base_value).abs());
    ensure(d <= tol, || format!("{name}: max |diff| {d:e} > {tol:e}"))?;
    Ok(d)
}

/// 1. Fast explainers agree with the enumeration oracle.
fn oracle_equivalence() -> Check {
    let mut worst_fast: f64 = 0.0;
    let mut worst_kernel: f64 = 0.0;
    for i in 0..50u64 {
        let mut r = rng(1000 + i);
        let n = 2 + (i as usize % 9);
        let k = 1 + (i as usize % 8);
        let x_train = normal_matrix(&mut r, 80, n);
        let y = labels_from(x_train.view(), &mut r);
        let bg = Background::new(normal_matrix(&mut r, k, n)).map_err(|e| e.to_string())?;
        let x: Array1<f64> = normal_matrix(&mut r, 1, n).row(0).to_owned();

        let lin = random_linear(&mut r, n);
        let oracle = exact_shapley(|rows| lin.margin(rows), x.view(), &bg).map_err(|e| e.to_string())?;
        let got = linear_shap(&lin, x.view(), &bg).map_err(|e| e.to_string())?;
        worst_fast = worst_fast.max(check_phi(&format!("instance {i} linear"), &got, &oracle, 1e-8)?);

        let (got, oracle) = match i % 3 {
            0 => {
                let m = train_tree(x_train.view(), &y, &small_tree()).map_err(|e| e.to_string())?;
                (tree_shap(&m, x.view(), &bg), exact_shapley(|rows| m.predict_proba(rows), x.view(), &bg))
            }
            1 => {
                let m = train_forest(x_train.view(), &y, &small_forest(), i).map_err(|e| e.to_string())?;
                (tree_shap(&m, x.view(), &bg), exact_shapley(|rows| m.predict_proba(rows), x.view(), &bg))
            }
            _ => {
                let m = train_gbt(x_train.view(), &y, &small_gbt(), i).map_err(|e| e.to_string())?;
                (tree_shap(&m, x.view(), &bg), exact_shapley(|rows| m.margin(rows), x.view(), &bg))
            }
        };
        let (got, oracle) = (got.map_err(|e| e.to_string())?, oracle.map_err(|e| e.to_string())?);
        worst_fast = worst_fast.max(check_phi(&format!("instance {i} tree"), &got, &oracle, 1e-8)?);

        let mlp = MlpModel::new(
            MlpArch::Plain {
                hidden: vec![6, 4],
                dropout: 0.0,
            },
            n,
            i,
        )
        .map_err(|e| e.to_string())?;
        let f = |rows: ArrayView2<'_, f64>| mlp.margin(rows);
        let oracle = exact_shapley(f, x.view(), &bg).map_err(|e| e.to_string())?;
        let got = kernel_shap(f, x.view(), &bg, (1 << n).max(n + 2), i).map_err(|e| e.to_string())?;
        worst_kernel = worst_kernel.max(check_phi(&format!("instance {i} kernel"), &got, &oracle, 1e-6)?);
    }
    Ok(format!(
        "50 instances; linear/tree max diff {worst_fast:.1e} (tol 1e-8), kernel {worst_kernel:.1e} (tol 1e-6)"
    ))
}

/// 2. Efficiency and null player over a 1000-case fuzz suite.
fn efficiency_and_null_player() -> Check {
    let mut worst_exact: f64 = 0.0;
    let mut worst_kernel: f64 = 0.0;
    let mut null_checks = 0;
    for c in 0..1000u64 {
        let mut r = rng(50_000 + c);
        let n = 1 + (c as usize % 8);
        let k = 1 + (c as usize % 6);
        let null = r.random_range(0..n);
        let mut x_train = normal_matrix(&mut r, 60, n);
        let y = labels_from(x_train.view(), &mut r);
        // the null feature is constant in training, so no tree splits on it
        x_train.column_mut(null).fill(0.25);
        let bg = Background::new(normal_matrix(&mut r, k, n)).map_err(|e| e.to_string())?;
        let x: Array1<f64> = normal_matrix(&mut r, 1, n).row(0).to_owned();

        let mut outputs: Vec<(&str, Explanation, f64, bool)> = Vec::new();
        match c % 4 {
            0 => {
                let mut lin = random_linear(&mut r, n);
                lin.weights[null] = 0.0;
                let f = lin.margin(x.view().insert_axis(Axis(0))).map_err(|e| e.to_string())?[0];
                outputs.push(("linear", linear_shap(&lin, x.view(), &bg).map_err(|e| e.to_string())?, f, true));
                outputs.push((
                    "exact",
                    exact_shapley(|rows| lin.margin(rows), x.view(), &bg).map_err(|e| e.to_string())?,
                    f,
                    true,
                ));
            }
            1 => {
                let m = train_tree(x_train.view(), &y, &small_tree()).map_err(|e| e.to_string())?;
                let f = m.predict_proba_row(x.view()).map_err(|e| e.to_string())?;
                outputs.push(("tree", tree_shap(&m, x.view(), &bg).map_err(|e| e.to_string())?, f, true));
                outputs.push((
                    "exact",
                    exact_shapley(|rows| m.predict_proba(rows), x.view(), &bg).map_err(|e| e.to_string())?,
                    f,
                    true,
                ));
            }
            2 => {
                let m = train_gbt(x_train.view(), &y, &small_gbt(), c).map_err(|e| e.to_string())?;
                let f = m.margin(x.view().insert_axis(Axis(0))).map_err(|e| e.to_string())?[0];
                outputs.push(("boosted", tree_shap(&m, x.view(), &bg).map_err(|e| e.to_string())?, f, true));
                let mf = train_forest(x_train.view(), &y, &small_forest(), c).map_err(|e| e.to_string())?;
                let ff = mf.predict_proba_row(x.view()).map_err(|e| e.to_string())?;
                outputs.push(("forest", tree_shap(&mf, x.view(), &bg).map_err(|e| e.to_string())?, ff, true));
            }
            _ => {
                let mut mlp = MlpModel::new(
                    MlpArch::Plain {
                        hidden: vec![5],
                        dropout: 0.0,
                    },
                    n,
                    c,
                )
                .map_err(|e| e.to_string())?;
                mlp.layers[0].weight.column_mut(null).fill(0.0);
                let f = mlp.margin(x.view().insert_axis(Axis(0))).map_err(|e| e.to_string())?[0];
                let g = |rows: ArrayView2<'_, f64>| mlp.margin(rows);
                outputs.push(("exact", exact_shapley(g, x.view(), &bg).map_err(|e| e.to_string())?, f, true));
                // sampled whenever the budget is below full enumeration
                let budget = (n + 2).max((1usize << n) / 2);
                outputs.push(("kernel", kernel_shap(g, x.view(), &bg, budget, c).map_err(|e| e.to_string())?, f, false));
            }
        }
        for (name, e, f, check_null) in outputs {
            let gap = (e.output() - f).abs() / f.abs().max(1.0);
            let tol = if name == "kernel" { 1e-6 } else { 1e-10 };
            ensure(gap <= tol, || format!("case {c} {name}: efficiency gap {gap:e} > {tol:e}"))?;
            if name == "kernel" {
                worst_kernel = worst_kernel.max(gap);
            } else {
                worst_exact = worst_exact.max(gap);
            }
            if check_null {
                let v = e.values[null].abs();
                ensure(v <= 1e-12, || format!("case {c} {name}: null feature phi = {v:e}"))?;
                null_checks += 1;
            }
        }
    }
    Ok(format!(
        "1000 cases; efficiency gap exact paths {worst_exact:.1e} (tol 1e-10), sampled kernel {worst_kernel:.1e} (tol 1e-6); {null_checks} null-player checks at 0"
    ))
}

fn random_survival(r: &mut Rng, n: usize, d: usize) -> SurvivalDataset {
    let x = normal_matrix(r, n, d);
    // a small duration grid produces ties
    let durations: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(1..=(n as u32 / 2).max(2)))).collect();
    let mut events: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.7).collect();
    events[0] = true;
    let names = (0..d).map(|j| format!("x{j}")).collect();
    SurvivalDataset::new(durations, events, FeatureMatrix::from_array(names, x).unwrap()).unwrap()
}

/// 3. Cox gradient and Hessian against central differences.
fn cox_finite_differences() -> Check {
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let mut r = rng(300 + s);
        let n = r.random_range(5..=30);
        let d = r.random_range(1..=4);
        let ds = random_survival(&mut r, n, d);
        let beta: Vec<f64> = (0..d).map(|_| 0.5 * r.sample::<f64, _>(StandardNormal)).collect();
        let pen = if s % 2 == 0 { 0.0 } else { 0.0007 };
        let tie = if s % 4 < 2 { TieRule::Efron } else { TieRule::Breslow };
        let at = |b: &[f64]| neg_log_partial_likelihood(b, &ds, pen, tie).map_err(|e| e.to_string());
        let e = at(&beta)?;
        let h = 1e-5;
        let mut fd_grad = vec![0.0; d];
        let mut fd_hess = vec![0.0; d * d];
        for j in 0..d {
            let mut up = beta.clone();
            up[j] += h;
            let mut dn = beta.clone();
            dn[j] -= h;
            let (eu, ed) = (at(&up)?, at(&dn)?);
            fd_grad[j] = (eu.value - ed.value) / (2.0 * h);
            for k in 0..d {
                fd_hess[k * d + j] = (eu.gradient[k] - ed.gradient[k]) / (2.0 * h);
            }
        }
        let g = rel_err(e.gradient.as_slice().unwrap(), &fd_grad);
        let hs = rel_err(e.hessian.as_slice().unwrap(), &fd_hess);
        ensure(g <= 1e-5 && hs <= 1e-5, || format!("dataset {s}: gradient rel {g:e}, hessian rel {hs:e}"))?;
        worst = worst.max(g).max(hs);
    }
    Ok(format!("20 datasets; worst relative error {worst:.1e} (tol 1e-5)"))
}

/// 4. Coefficient recovery on the reference synthetic cohort.
fn beta_recovery() -> Check {
    let cfg = SyntheticConfig::default();
    let cohort = generate_synthetic_cohort(&cfg).map_err(|e| e.to_string())?;
    let fit = fit_cox(&cohort.survival, &CoxOptions::default()).map_err(|e| e.to_string())?;
    let err = max_abs_diff(&fit.beta, &cfg.true_beta);
    let null = fit.beta[2].abs().max(fit.beta[3].abs());
    ensure(err <= 0.1 && null <= 0.1, || format!("beta_hat {:?}, |err|_inf {err:.4}", fit.beta))?;
    Ok(format!(
        "n=2000, censored {:.3}; beta_hat {:?}; |err|_inf {err:.4} (tol 0.1)",
        cohort.truth.censor_fraction,
        fit.beta.iter().map(|b| (b * 1e4).round() / 1e4).collect::<Vec<_>>()
    ))
}

/// 5. Breslow at beta = 0 is the Nelson-Aalen estimator.
fn nelson_aalen() -> Check {
    let mut points = 0;
    for s in 0..10u64 {
        let mut r = rng(500 + s);
        let n = r.random_range(10..=60);
        let ds = random_survival(&mut r, n, 2);
        let problem = CoxProblem::from_dataset(&ds).map_err(|e| e.to_string())?;
        let h = breslow_baseline(&problem, ndarray::arr1(&[0.0, 0.0]).view());
        // oracle: sum over event times t_i <= t of deaths / at-risk
        let mut times: Vec<f64> = ds.durations().iter().zip(ds.events()).filter(|(_, e)| **e).map(|(t, _)| *t).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut acc = 0.0;
        let mut na = Vec::new();
        for &t in &times {
            let deaths = ds.durations().iter().zip(ds.events()).filter(|(d, e)| **e && **d == t).count();
            let at_risk = ds.durations().iter().filter(|d| **d >= t).count();
            acc += deaths as f64 / at_risk as f64;
            na.push(acc);
        }
        ensure(h.times == times, || format!("dataset {s}: jump times differ"))?;
        ensure(h.cumulative == na, || {
            format!("dataset {s}: max diff {:e}", max_abs_diff(&h.cumulative, &na))
        })?;
        // and pointwise between jumps
        for w in times.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            ensure(h.at(mid) == h.at(w[0]), || format!("dataset {s}: step function not flat"))?;
        }
        points += times.len();
    }
    Ok(format!("10 datasets, {points} jump points bit-identical to Nelson-Aalen"))
}

/// 6. C-index against explicit pair enumeration.
fn cindex_brute_force() -> Check {
    for s in 0..100u64 {
        let mut r = rng(600 + s);
        let n = r.random_range(2..=50);
        let risk: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8))).collect();
        let dur: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(1..15))).collect();
        let mut ev: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.6).collect();
        ev[0] = true;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                // the earlier failure must be an observed event
                let (a, b) = if dur[i] < dur[j] {
                    (i, j)
                } else if dur[j] < dur[i] {
                    (j, i)
                } else {
                    continue;
                };
                if !ev[a] {
                    continue;
                }
                den += 1.0;
                if risk[a] > risk[b] {
                    num += 1.0;
                } else if risk[a] == risk[b] {
                    num += 0.5;
                }
            }
        }
        let got = concordance_index(&risk, &dur, &ev, TieCredit::Half);
        if den == 0.0 {
            ensure(got.is_err(), || format!("instance {s}: no comparable pairs should be an error"))?;
        } else {
            let got = got.map_err(|e| e.to_string())?;
            let want = num / den;
            ensure(got == want, || format!("instance {s}: {got} != {want}"))?;
        }
    }
    Ok("100 instances equal pair enumeration exactly".into())
}

/// 7. Metric fixed points.
fn metric_fixed_points() -> Check {
    let labels = [true, false, true, false, false, true];
    let perfect: Vec<f64> = labels.iter().map(|&l| if l { 0.9 } else { 0.1 }).collect();
    let a = auroc(&perfect, &labels).map_err(|e| e.to_string())?;
    ensure(a == 1.0, || format!("perfect AUROC {a}"))?;
    let tied = [0.4; 6];
    let a = auroc(&tied, &labels).map_err(|e| e.to_string())?;
    let dur = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let ev = [true, true, false, true, true, false];
    let c = concordance_index(&tied, &dur, &ev, TieCredit::Half).map_err(|e| e.to_string())?;
    let dy = dynamic_auc(&tied, &dur, &ev, &[2.5, 4.5]).map_err(|e| e.to_string())?;
    ensure(a == 0.5 && c == 0.5 && dy.iter().all(|p| p.value == Some(0.5)), || {
        format!("tied: AUROC {a}, C {c}, dynamic {dy:?}")
    })?;
    let b = brier_from_predictions(&[0.5; 4], &[1.0, 2.0, 5.0, 6.0], &[true; 4], 3.0, BrierMode::Literal)
        .map_err(|e| e.to_string())?;
    ensure(b == 0.25, || format!("constant 0.5 Brier {b}"))?;
    let b = brier_from_predictions(&[0.9, 0.8, 0.3, 0.1], &[5.0, 6.0, 1.0, 2.0], &[true; 4], 3.0, BrierMode::Literal)
        .map_err(|e| e.to_string())?;
    ensure((b - 0.0375).abs() < 1e-15, || format!("hand Brier {b}"))?;
    Ok(format!("AUROC 1.0; tied AUROC = C = dynamic AUC = 0.5; Brier 0.25 and {b}"))
}

fn mlp_gradient_error(model: &mut MlpModel, x: ArrayView2<'_, f64>, y: &[bool]) -> Result<f64, String> {
    let (_, grads) = model.loss_and_gradient(x, y, None).map_err(|e| e.to_string())?;
    let analytic = MlpModel::flatten_gradient(&grads);
    let params = model.parameters();
    let h = 1e-6;
    let mut numeric = vec![0.0; params.len()];
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] = params[k] + h;
        model.set_parameters(&p).map_err(|e| e.to_string())?;
        let up = model.loss_and_gradient(x, y, None).map_err(|e| e.to_string())?.0;
        p[k] = params[k] - h;
        model.set_parameters(&p).map_err(|e| e.to_string())?;
        let dn = model.loss_and_gradient(x, y, None).map_err(|e| e.to_string())?.0;
        numeric[k] = (up - dn) / (2.0 * h);
    }
    model.set_parameters(&params).map_err(|e| e.to_string())?;
    Ok(rel_err(&analytic, &numeric))
}

/// 8. MLP backpropagation against finite differences; zero residual block is the identity.
fn mlp_gradient_check() -> Check {
    let mut r = rng(800);
    let x = normal_matrix(&mut r, 12, 4);
    let y = labels_from(x.view(), &mut r);
    let mut plain = MlpModel::new(
        MlpArch::Plain {
            hidden: vec![5, 3],
            dropout: 0.2,
        },
        4,
        1,
    )
    .map_err(|e| e.to_string())?;
    let mut residual = MlpModel::new(
        MlpArch::Residual {
            n_blocks: 2,
            hidden_dim: 3,
            stem: true,
        },
        4,
        2,
    )
    .map_err(|e| e.to_string())?;
    // without the stem the first block skips through a projection
    let mut projected = MlpModel::new(
        MlpArch::Residual {
            n_blocks: 1,
            hidden_dim: 3,
            stem: false,
        },
        4,
        2,
    )
    .map_err(|e| e.to_string())?;
    let ep = mlp_gradient_error(&mut plain, x.view(), &y)?;
    let er = mlp_gradient_error(&mut residual, x.view(), &y)?;
    let ej = mlp_gradient_error(&mut projected, x.view(), &y)?;
    ensure(ep <= 1e-4 && er <= 1e-4 && ej <= 1e-4, || {
        format!("relative errors: plain {ep:e}, residual {er:e}, projected {ej:e}")
    })?;

    // zero-weight blocks of matching width leave the input untouched, so the
    // network reduces to its head
    let mut zeroed = MlpModel::new(
        MlpArch::Residual {
            n_blocks: 2,
            hidden_dim: 4,
            stem: false,
        },
        4,
        3,
    )
    .map_err(|e| e.to_string())?;
    let head = zeroed.layers.last().unwrap().clone();
    let n_layers = zeroed.layers.len();
    for l in &mut zeroed.layers[..n_layers - 1] {
        l.weight.fill(0.0);
        if let Some(b) = &mut l.bias {
            b.fill(0.0);
        }
    }
    let mut linear = MlpModel::new(
        MlpArch::Plain {
            hidden: vec![],
            dropout: 0.0,
        },
        4,
        0,
    )
    .map_err(|e| e.to_string())?;
    linear.layers[0] = head;
    let a = zeroed.margin(x.view()).map_err(|e| e.to_string())?;
    let b = linear.margin(x.view()).map_err(|e| e.to_string())?;
    ensure(a == b, || format!("zero residual blocks change the output by {:e}", max_abs_diff(a.as_slice().unwrap(), b.as_slice().unwrap())))?;
    Ok(format!("relative error plain {ep:.1e}, residual {er:.1e}, projected {ej:.1e} (tol 1e-4); zero residual blocks exact identity"))
}

fn directional_cohort() -> survshap::pipeline::Cohort {
    let cfg = SyntheticConfig {
        n_subjects: 1000,
        n_signal_features: 5,
        n_noise_features: 40,
        true_beta: vec![0.7, -0.6, 0.5, 0.5, -0.4],
        kfre_beta: Some(vec![0.3, 0.1, -0.4, 0.3, 0.0, 0.1, 0.0, -0.2]),
        baseline_shape: 1.5,
        baseline_scale: 1500.0,
        censor_rate_target: 0.4,
        seed: 909,
    };
    let c = generate_synthetic_cohort(&cfg).unwrap();
    survshap::pipeline::Cohort::from_survival(c.survival)
}

/// 9. Augmented pipelines beat the KFRE-8 baseline.
fn directional() -> Check {
    let cohort = directional_cohort();
    let run = |arm: Arm| -> Result<f64, String> {
        let cfg = PipelineConfig {
            family: arm,
            top_j: 10,
            seed: 17,
            jobs: 5,
            ..Default::default()
        };
        let rep = run_pipeline(&cohort.features, &cohort.survival, &cohort.labels, &cfg).map_err(|e| e.to_string())?;
        Ok(rep.c_index_mean)
    };
    let base = run(Arm::Baseline)?;
    let mut parts = vec![format!("baseline {base:.4}")];
    for fam in [Family::Gbt, Family::Lr] {
        let c = run(Arm::Classifier(fam))?;
        parts.push(format!("{fam} {c:.4} (+{:.4})", c - base));
        ensure(c - base >= 0.02, || format!("{fam}: {c:.4} vs baseline {base:.4}"))?;
    }
    Ok(format!("mean test C-index over 5 folds: {}", parts.join(", ")))
}

/// 10. Selection contract.
fn selection_contract() -> Check {
    let kfre = Kfre8Spec::default();
    let pool: Vec<String> = KFRE8_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..80).map(|i| format!("f{i}")))
        .collect();
    let mut cases = 0;
    for s in 0..500u64 {
        let mut r = rng(1000 + s);
        let len = r.random_range(0..=pool.len());
        let idx = rand::seq::index::sample(&mut r, pool.len(), len);
        let ranking = FeatureRanking {
            entries: idx
                .iter()
                .enumerate()
                .map(|(k, i)| RankedFeature {
                    feature: pool[i].clone(),
                    mean_abs: (len - k) as f64,
                })
                .collect(),
        };
        let j = r.random_range(0..=len);
        let f = select_features(&ranking, j, &kfre).map_err(|e| e.to_string())?;
        let names: Vec<&str> = f.iter().map(|x| x.feature.as_str()).collect();
        ensure((j.max(8)..=j + 8).contains(&f.len()), || format!("case {s}: |F| = {} with j = {j}", f.len()))?;
        ensure(KFRE8_COLUMNS.iter().all(|c| names.contains(c)), || format!("case {s}: KFRE-8 missing"))?;
        let mut dedup = names.clone();
        dedup.sort_unstable();
        dedup.dedup();
        ensure(dedup.len() == names.len(), || format!("case {s}: duplicate features"))?;
        cases += 1;
    }
    let default_j = PipelineConfig::default().top_j;
    ensure(default_j == 40, || format!("default top_j {default_j}"))?;
    Ok(format!("{cases} random rankings; |F| in [max(j,8), j+8], KFRE-8 always included; default j = {default_j}"))
}

fn small_cohort(seed: u64) -> survshap::pipeline::Cohort {
    let cfg = SyntheticConfig {
        n_subjects: 400,
        n_signal_features: 3,
        n_noise_features: 6,
        true_beta: vec![0.8, -0.5, 0.4],
        kfre_beta: Some(vec![0.2, 0.0, -0.3, 0.2, 0.0, 0.0, 0.0, 0.0]),
        seed,
        ..Default::default()
    };
    survshap::pipeline::Cohort::from_survival(generate_synthetic_cohort(&cfg).unwrap().survival)
}

/// 11. Identical config and seed give byte-identical report files.
fn determinism() -> Check {
    let cohort = small_cohort(1100);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut manifests = Vec::new();
    for (i, jobs) in [1usize, 1, 3].into_iter().enumerate() {
        let cfg = PipelineConfig {
            family: Arm::Classifier(Family::Gbt),
            top_j: 5,
            seed: 99,
            jobs,
            ..Default::default()
        };
        let rep = run_pipeline(&cohort.features, &cohort.survival, &cohort.labels, &cfg).map_err(|e| e.to_string())?;
        manifests.push(emit_report(&rep, dir.path().join(format!("run{i}"))).map_err(|e| e.to_string())?);
    }
    ensure(manifests[0] == manifests[1], || "repeated runs differ".into())?;
    // the serialized config records `jobs`, so compare the other five files
    ensure(manifests[0].files[1..] == manifests[2].files[1..], || "parallel run differs".into())?;
    for f in &manifests[0].files {
        let a = std::fs::read(dir.path().join("run0").join(&f.file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.path().join("run1").join(&f.file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{} bytes differ", f.file))?;
    }
    Ok(format!("{} report files with equal SHA-256 across two runs (and a 3-job run)", manifests[0].files.len()))
}

/// 12. Coefficient norm shrinks along the penalty ladder.
fn penalty_monotonicity() -> Check {
    let cohort = generate_synthetic_cohort(&SyntheticConfig {
        n_subjects: 500,
        seed: 1200,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let ladder = [0.0, 0.0007, 0.1, 1.0, 10.0];
    let mut norms = Vec::new();
    for pen in ladder {
        let fit = fit_cox(
            &cohort.survival,
            &CoxOptions {
                penalizer: pen,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        norms.push(norm(&fit.beta));
    }
    ensure(norms.windows(2).all(|w| w[1] <= w[0]), || format!("norms {norms:?}"))?;
    Ok(format!(
        "penalizers {ladder:?} -> |beta|_2 {:?}",
        norms.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>()
    ))
}

/// 13. A poisoned held-out row leaves every training artifact unchanged.
fn leakage() -> Check {
    let cohort = small_cohort(1300);
    let cfg = PipelineConfig {
        family: Arm::Classifier(Family::Gbt),
        top_j: 5,
        seed: 5,
        union_all_families: false,
        ..Default::default()
    };
    let folds = fold_assignment(cohort.features.n_rows(), &cfg).map_err(|e| e.to_string())?;
    let clean = run_fold(&cohort.features, &cohort.survival, &cohort.labels, &cfg, &folds, 0).map_err(|e| e.to_string())?;
    let victim = folds[0][0];
    let mut values = cohort.features.values().to_owned();
    // indicator columns must stay 0/1, so only continuous values are scaled
    for (j, kind) in cohort.features.kinds().iter().enumerate() {
        if !kind.is_indicator() {
            values[[victim, j]] *= 1e6;
        }
    }
    let poisoned_features = cohort.features.with_values(values).map_err(|e| e.to_string())?;
    let poisoned_survival = cohort
        .survival
        .with_features(poisoned_features.clone())
        .map_err(|e| e.to_string())?;
    let dirty = run_fold(&poisoned_features, &poisoned_survival, &cohort.labels, &cfg, &folds, 0).map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let json = |v: &survshap::data::Standardizer| serde_json::to_string(v).unwrap();
    ensure(json(&clean.standardizer) == json(&dirty.standardizer), || "imputation statistics changed".into())?;
    ensure(clean.rankings == dirty.rankings, || "rankings changed".into())?;
    ensure(bits(&clean.cox.beta) == bits(&dirty.cox.beta), || "Cox coefficients changed".into())?;
    ensure(clean.test_rows.contains(&victim), || "victim not held out".into())?;

    // negative control: a mild shift of one training row must show up
    let trainee = folds[1][0];
    let mut values = cohort.features.values().to_owned();
    values[[trainee, cohort.features.column_index("egfr").unwrap()]] += 10.0;
    let features = cohort.features.with_values(values).map_err(|e| e.to_string())?;
    let survival = cohort.survival.with_features(features.clone()).map_err(|e| e.to_string())?;
    let control = run_fold(&features, &survival, &cohort.labels, &cfg, &folds, 0).map_err(|e| e.to_string())?;
    ensure(json(&clean.standardizer) != json(&control.standardizer), || "control: poisoned training row went unnoticed".into())?;
    Ok(format!(
        "test row {victim} continuous values scaled by 1e6: standardizer, ranking and {} coefficients bit-identical; training-row control detected",
        clean.cox.beta.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("shapley oracle equivalence", oracle_equivalence),
        ("shapley efficiency and null player", efficiency_and_null_player),
        ("cox finite differences", cox_finite_differences),
        ("cox coefficient recovery", beta_recovery),
        ("baseline equals nelson-aalen at beta 0", nelson_aalen),
        ("c-index brute force", cindex_brute_force),
        ("metric fixed points", metric_fixed_points),
        ("mlp gradient check", mlp_gradient_check),
        ("augmented beats baseline", directional),
        ("selection contract", selection_contract),
        ("determinism", determinism),
        ("penalty monotonicity", penalty_monotonicity),
        ("leakage", leakage),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
